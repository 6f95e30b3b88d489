"""Dense real-valued tensor algebra.

Tensors are plain ``numpy.ndarray`` objects with ``float64`` entries and
row-major layout; axis meaning (bond, physical, ...) is a documented
convention of each caller. This module provides the three primitives the
network code is built on: pairwise contraction, axis reordering, and a
truncated singular value decomposition with an explicit account of the
discarded weight.

All functions are pure: they never mutate their inputs and hold no state,
so they are safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError, DimensionError

__all__ = ["SvdResult", "contract_pair", "reorder_axes", "truncated_svd", "as_tensor"]


def as_tensor(values) -> np.ndarray:
    """Coerce ``values`` to a float64 ndarray (no copy when already one)."""
    return np.asarray(values, dtype=np.float64)


def contract_pair(
    a: np.ndarray,
    b: np.ndarray,
    axis_pairs: Sequence[tuple[int, int]] = (),
) -> np.ndarray:
    """Contract two tensors along the given axis pairs.

    Parameters
    ----------
    a, b : np.ndarray
        Operands of arbitrary rank.
    axis_pairs : sequence of (int, int)
        Pairs ``(axis_of_a, axis_of_b)`` to sum over. Empty pairs give the
        outer product.

    Returns
    -------
    np.ndarray
        Result whose axes are the unpaired axes of ``a`` in order followed
        by the unpaired axes of ``b`` in order. Contracting all axes yields
        a rank-0 tensor.

    Raises
    ------
    DimensionError
        If a paired axis is out of range, appears twice, or the paired
        extents differ.
    """
    a = as_tensor(a)
    b = as_tensor(b)
    a_axes = [p[0] for p in axis_pairs]
    b_axes = [p[1] for p in axis_pairs]
    for axes, t, name in ((a_axes, a, "a"), (b_axes, b, "b")):
        for ax in axes:
            if not -t.ndim <= ax < t.ndim:
                raise DimensionError(f"axis {ax} out of range for operand {name} of rank {t.ndim}")
        normalized = [ax % t.ndim for ax in axes]
        if len(set(normalized)) != len(normalized):
            raise DimensionError(f"duplicate contraction axis in operand {name}: {axes}")
    for ax_a, ax_b in axis_pairs:
        if a.shape[ax_a] != b.shape[ax_b]:
            raise DimensionError(
                f"extent mismatch: a-axis {ax_a} has extent {a.shape[ax_a]}, "
                f"b-axis {ax_b} has extent {b.shape[ax_b]}"
            )
    return np.tensordot(a, b, axes=(a_axes, b_axes))


def reorder_axes(a: np.ndarray, permutation: Sequence[int]) -> np.ndarray:
    """Permute tensor axes so that output axis ``k`` is input axis ``permutation[k]``.

    The identity permutation returns an equal tensor. Raises
    :class:`DimensionError` if ``permutation`` is not a bijection over the
    axis indices.
    """
    a = as_tensor(a)
    perm = list(permutation)
    if sorted(perm) != list(range(a.ndim)):
        raise DimensionError(f"permutation {perm} is not a bijection over {a.ndim} axes")
    return np.transpose(a, perm)


@dataclass(frozen=True)
class SvdResult:
    """Outcome of a truncated singular value decomposition ``m ~ U diag(s) Vt``.

    ``left_isometry`` has orthonormal columns, ``right_isometry`` orthonormal
    rows, ``singular_values`` is non-increasing and strictly positive, and
    ``discarded_weight`` is the sum of the squared singular values that were
    dropped (equal to the squared Frobenius reconstruction error).
    """

    left_isometry: np.ndarray
    singular_values: np.ndarray
    right_isometry: np.ndarray
    discarded_weight: float

    @property
    def rank(self) -> int:
        return len(self.singular_values)


def truncated_svd(
    m: np.ndarray,
    rel_threshold: float = 0.0,
    max_rank: int | None = None,
) -> SvdResult:
    """Truncated SVD keeping singular values with ``s >= rel_threshold * s_max``.

    The retained rank is additionally capped at ``max_rank``; at least one
    singular value is always kept. The threshold is relative to the largest
    singular value so that truncation is invariant under rescaling of ``m``.
    Ties are broken deterministically by keeping earlier (larger) values.

    Raises
    ------
    DimensionError
        If ``m`` is not a matrix or the parameters are out of range.
    DegenerateInputError
        If ``m`` is entirely zero (no meaningful decomposition exists).
    """
    m = as_tensor(m)
    if m.ndim != 2:
        raise DimensionError(f"truncated_svd expects a matrix, got rank {m.ndim}")
    if not 0.0 <= rel_threshold < 1.0:
        raise DimensionError(f"rel_threshold must lie in [0, 1), got {rel_threshold}")
    if max_rank is not None and max_rank < 1:
        raise DimensionError(f"max_rank must be >= 1, got {max_rank}")
    if not np.any(m):
        raise DegenerateInputError("cannot decompose an all-zero matrix")

    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; fall back to the slower
        # but more robust QR-based driver via the Gram matrix route.
        u, s, vt = _svd_via_gram(m)

    keep = int(np.count_nonzero(s >= rel_threshold * s[0]))
    keep = min(keep, int(np.count_nonzero(s > 0.0)))
    if max_rank is not None:
        keep = min(keep, max_rank)
    keep = max(keep, 1)

    discarded = float(np.sum(s[keep:] ** 2))
    return SvdResult(
        left_isometry=np.ascontiguousarray(u[:, :keep]),
        singular_values=s[:keep].copy(),
        right_isometry=np.ascontiguousarray(vt[:keep, :]),
        discarded_weight=discarded,
    )


def _svd_via_gram(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD through the smaller Gram matrix's symmetric eigendecomposition."""
    rows, cols = m.shape
    if rows <= cols:
        w, u = np.linalg.eigh(m @ m.T)
        order = np.argsort(w)[::-1]
        w, u = w[order], u[:, order]
        s = np.sqrt(np.clip(w, 0.0, None))
        safe = np.where(s > 0, s, 1.0)
        vt = (u.T @ m) / safe[:, None]
        return u, s, vt
    w, v = np.linalg.eigh(m.T @ m)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    s = np.sqrt(np.clip(w, 0.0, None))
    safe = np.where(s > 0, s, 1.0)
    u = (m @ v) / safe[None, :]
    return u, s, v.T
