"""Quantum-inspired information extraction from trained models.

The reduced density matrix of a feature subset is the model's marginal
over that subset: contract the network with its transpose, leaving the
subset's physical legs open. Because the feature encoding is orthonormal,
marginalizing a feature is a plain index contraction (the integral over
its encodings resolves to the identity), and conditioning fixes a feature
by inserting the rank-1 projector onto its encoded value.

From the (trace-normalized) density matrices this module derives the
induced quasi-probability density and its moments, von Neumann entropies,
mutual information between feature groups, per-feature anomaly flags, and
conditional expected values for flagged features.
"""

from __future__ import annotations

import logging
import string
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .encoding import gauss_legendre_unit, orthonormal_basis
from .errors import (
    ConditioningError,
    DataError,
    NumericalError,
    ResourceLimitError,
)
from .mps import MpsModel
from .ttn import TtnModel

logger = logging.getLogger(__name__)

__all__ = [
    "ReducedDensityMatrix",
    "MarginalStats",
    "FeatureFlag",
    "AnomalyExplanation",
    "MiMatrices",
    "reduced_density_matrix",
    "conditional_rdm",
    "quasi_density",
    "marginal_moments",
    "von_neumann_entropy",
    "mutual_information",
    "all_to_all_mi",
    "flag_features",
    "conditional_expectations",
    "explain_sample",
]

_SYMBOLS = string.ascii_letters
DEFAULT_MAX_SUBSYSTEM_DIM = 256
_MIN_CONDITIONAL_TRACE = 1e-30


@dataclass(frozen=True)
class ReducedDensityMatrix:
    """Trace-normalized, symmetric marginal over a feature subset.

    ``matrix`` has shape ``(N**k, N**k)`` with row/column index running
    row-major over the features in ``sites`` order.
    """

    sites: tuple[int, ...]
    matrix: np.ndarray
    phys_dim: int
    trace_before_normalization: float

    @property
    def n_sites(self) -> int:
        return len(self.sites)


@dataclass(frozen=True)
class MarginalStats:
    """Moments of the normalized quasi-density of a subsystem.

    ``mean``/``std``/``covariance`` live in the rescaled [0, 1] domain;
    ``raw_mean``/``raw_std`` are mapped back through the inverse rescaler
    when one is available.
    """

    sites: tuple[int, ...]
    mean: np.ndarray
    std: np.ndarray
    covariance: np.ndarray
    raw_mean: np.ndarray | None = None
    raw_std: np.ndarray | None = None


@dataclass
class FeatureFlag:
    """Per-feature entry of an anomaly explanation (raw-domain values)."""

    index: int
    observed: float
    mean: float
    std: float
    flagged: bool
    observed_rescaled: float
    mean_rescaled: float
    std_rescaled: float
    conditional_expected: float | None = None


@dataclass
class AnomalyExplanation:
    """Scored sample with per-feature deviation flags and conditionals."""

    sample_id: int
    nll: float
    k_sigma: float
    features: list[FeatureFlag]

    def flagged_indices(self) -> list[int]:
        return [f.index for f in self.features if f.flagged]

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "nll": self.nll,
            "threshold": self.k_sigma,
            "features": [
                {
                    "index": f.index,
                    "observed": f.observed,
                    "mean": f.mean,
                    "std": f.std,
                    "flagged": f.flagged,
                    "conditional_expected": f.conditional_expected,
                }
                for f in self.features
            ],
        }


class MiMatrices(NamedTuple):
    """All-to-all mutual information: raw values and a display rescaling."""

    raw: np.ndarray
    display: np.ndarray


# ---------------------------------------------------------------------------
# reduced density matrices


def _analysis_copy(model):
    """Copy of the model with any padded slot pinned to its fixed encoding.

    The dummy feature is never free: the state is only ever evaluated with
    it at the interval midpoint, so for density-matrix work it acts as a
    condition, not a marginal. Absorbing the pad vector into the leaf (in
    a single basis slot) makes the ordinary identity-trace of that slot
    reproduce the pinned contraction, so every analysis path can treat the
    pad like any marginalized feature. The copy must be re-canonicalized
    before isometry-based shortcuts are used.
    """
    work = model.copy()
    if isinstance(work, TtnModel) and work.padding:
        pad_feature = work.padded_features - 1
        leaf, slot = work.leaf_of_feature(pad_feature)
        tensor = work.tensors[leaf]
        pinned = np.tensordot(tensor, orthonormal_basis(work.phys_dim, 0.5), axes=(slot, 0))
        replacement = np.zeros_like(tensor)
        replacement[:, :, 0] = pinned
        work.tensors[leaf] = replacement
    return work


def _finalize_rdm(rho, sites, requested, phys_dim) -> ReducedDensityMatrix:
    """Symmetrize, reorder open legs to the requested site order, normalize."""
    k = len(sites)
    n = phys_dim
    if tuple(sites) != tuple(requested):
        pos = {s: i for i, s in enumerate(sites)}
        perm = [pos[s] for s in requested]
        tensor = rho.reshape((n,) * (2 * k))
        tensor = np.transpose(tensor, perm + [k + p for p in perm])
        rho = tensor.reshape(n**k, n**k)
    rho = 0.5 * (rho + rho.T)
    trace = float(np.trace(rho))
    if trace < _MIN_CONDITIONAL_TRACE:
        raise ConditioningError(
            f"density matrix trace {trace:.3e} is below {_MIN_CONDITIONAL_TRACE:.0e}; "
            "the conditioning values are (near-)impossible under the model"
        )
    return ReducedDensityMatrix(
        sites=tuple(requested),
        matrix=rho / trace,
        phys_dim=n,
        trace_before_normalization=trace,
    )


def _mps_rdm(model: MpsModel, targets, conditions, max_dim) -> ReducedDensityMatrix:
    n = model.phys_dim
    targets_sorted = tuple(sorted(targets))
    involved = sorted(set(targets_sorted) | set(conditions))
    work = model.copy()
    work.canonicalize(involved[0])

    cond_vecs = {s: orthonormal_basis(n, x) for s, x in conditions.items()}
    d0 = work.cores[involved[0]].shape[0]
    marching = np.eye(d0).reshape(1, 1, d0, d0)
    for site in range(involved[0], involved[-1] + 1):
        core = work.cores[site]
        if site in targets_sorted:
            kk, bb = marching.shape[0], marching.shape[1]
            marching = np.einsum(
                "KBls,lpr,squ->KpBqru", marching, core, core, optimize=True
            ).reshape(kk * n, bb * n, core.shape[2], core.shape[2])
        elif site in cond_vecs:
            pinned = np.einsum("lpr,p->lr", core, cond_vecs[site])
            marching = np.einsum("KBls,lr,su->KBru", marching, pinned, pinned, optimize=True)
        else:
            marching = np.einsum("KBls,lpr,spu->KBru", marching, core, core, optimize=True)
    rho = np.einsum("KBrr->KB", marching)
    return _finalize_rdm(rho, targets_sorted, targets, n)


def _ttn_rdm(model: TtnModel, targets, conditions, max_dim) -> ReducedDensityMatrix:
    n = model.phys_dim
    work = _analysis_copy(model)
    cond_vecs = {f: orthonormal_basis(n, x) for f, x in conditions.items()}
    involved = set(targets) | set(cond_vecs)
    involved_leaves = sorted({work.leaf_of_feature(f)[0] for f in involved})
    anchor = involved_leaves[0]
    work.canonicalize(anchor)

    # a tree edge belongs to the spanning subtree iff involved leaves sit on both sides
    in_subtree = {anchor}
    for u in range(work.n_nodes):
        p = work.parents[u]
        if p < 0:
            continue
        behind = work.features_behind(u, p)
        if (involved & behind) and (involved - behind):
            in_subtree.add(u)
            in_subtree.add(p)

    target_set = set(targets)

    def rec(u: int, toward: int):
        """Message covering node ``u``'s side of edge (u, toward).

        Returns ``(array, ket_features)`` with axes
        ``(*ket_opens, *bra_opens, bond, bond~)``.
        """
        tensor = work.tensors[u]
        spec = work.axis_spec(u)
        symbols = iter(_SYMBOLS)
        ket_sub = [next(symbols) for _ in spec]
        bra_sub = list(ket_sub)
        operands: list[np.ndarray] = []
        subs: list[str] = []
        ket_opens: list[str] = []
        bra_opens: list[str] = []
        open_feats: list[int] = []
        out_bond = ("", "")

        for ax, (kind, ref) in enumerate(spec):
            if kind == "bond" and ref == toward:
                bra_sub[ax] = next(symbols)
                out_bond = (ket_sub[ax], bra_sub[ax])
            elif kind == "phys":
                if ref in target_set:
                    bra_sub[ax] = next(symbols)
                    ket_opens.append(ket_sub[ax])
                    bra_opens.append(bra_sub[ax])
                    open_feats.append(ref)
                elif ref in cond_vecs:
                    bra_sub[ax] = next(symbols)
                    operands += [cond_vecs[ref], cond_vecs[ref]]
                    subs += [ket_sub[ax], bra_sub[ax]]
                # else: marginalized, shared symbol contracts ket with bra
            else:  # bond to a non-toward neighbor
                if ref in in_subtree:
                    child_msg, child_feats = rec(ref, u)
                    bra_sub[ax] = next(symbols)
                    child_subs = [next(symbols) for _ in range(2 * len(child_feats))]
                    operands.append(child_msg)
                    subs.append("".join(child_subs) + ket_sub[ax] + bra_sub[ax])
                    half = len(child_feats)
                    ket_opens.extend(child_subs[:half])
                    bra_opens.extend(child_subs[half:])
                    open_feats.extend(child_feats)
                # else: exterior region is isometric toward the center and
                # contracts to the identity, so ket and bra share the symbol
        out = "".join(ket_opens) + "".join(bra_opens) + out_bond[0] + out_bond[1]
        expr = ",".join(["".join(ket_sub), "".join(bra_sub)] + subs) + "->" + out
        return np.einsum(expr, tensor, tensor, *operands, optimize=True), open_feats

    # close the contraction at the anchor: treat it like a message with no out bond
    t = work.tensors[anchor]
    spec = work.axis_spec(anchor)
    symbols = iter(_SYMBOLS)
    ket_sub = [next(symbols) for _ in spec]
    bra_sub = list(ket_sub)
    operands: list[np.ndarray] = []
    subs: list[str] = []
    ket_opens: list[str] = []
    bra_opens: list[str] = []
    open_feats: list[int] = []
    for ax, (kind, ref) in enumerate(spec):
        if kind == "phys":
            if ref in target_set:
                bra_sub[ax] = next(symbols)
                ket_opens.append(ket_sub[ax])
                bra_opens.append(bra_sub[ax])
                open_feats.append(ref)
            elif ref in cond_vecs:
                bra_sub[ax] = next(symbols)
                operands += [cond_vecs[ref], cond_vecs[ref]]
                subs += [ket_sub[ax], bra_sub[ax]]
        else:
            if ref in in_subtree:
                child_msg, child_feats = rec(ref, anchor)
                bra_sub[ax] = next(symbols)
                child_subs = [next(symbols) for _ in range(2 * len(child_feats))]
                operands.append(child_msg)
                subs.append("".join(child_subs) + ket_sub[ax] + bra_sub[ax])
                half = len(child_feats)
                ket_opens.extend(child_subs[:half])
                bra_opens.extend(child_subs[half:])
                open_feats.extend(child_feats)
    out = "".join(ket_opens) + "".join(bra_opens)
    expr = ",".join(["".join(ket_sub), "".join(bra_sub)] + subs) + "->" + out
    rho_tensor = np.einsum(expr, t, t, *operands, optimize=True)

    k = len(open_feats)
    rho = rho_tensor.reshape(n**k, n**k)
    return _finalize_rdm(rho, tuple(open_feats), targets, n)


def _check_subsystem(model, sites, max_dim) -> None:
    n_features = model.n_sites if isinstance(model, MpsModel) else model.n_features
    if len(sites) == 0:
        raise DataError("subsystem must contain at least one feature")
    if len(set(sites)) != len(sites):
        raise DataError(f"duplicate feature in subsystem {sites}")
    for s in sites:
        if not 0 <= s < n_features:
            raise DataError(f"feature {s} out of range (model has {n_features})")
    if model.phys_dim ** len(sites) > max_dim:
        raise ResourceLimitError(
            f"subsystem of {len(sites)} features needs matrices of extent "
            f"{model.phys_dim ** len(sites)} > budget {max_dim}"
        )


def reduced_density_matrix(
    model, sites, max_dim: int = DEFAULT_MAX_SUBSYSTEM_DIM
) -> ReducedDensityMatrix:
    """Marginal density matrix of the model over the given features.

    The model's canonical structure lets everything outside the subsystem
    contract to the identity; gaps between non-adjacent features are
    bridged by identity-resolved transfer contractions. Operates on an
    internal copy; the model is not modified.
    """
    sites = tuple(int(s) for s in sites)
    _check_subsystem(model, sites, max_dim)
    if isinstance(model, MpsModel):
        return _mps_rdm(model, sites, {}, max_dim)
    if isinstance(model, TtnModel):
        return _ttn_rdm(model, sites, {}, max_dim)
    raise DataError(f"unsupported model type {type(model).__name__}")


def conditional_rdm(
    model, target_sites, conditions, max_dim: int = DEFAULT_MAX_SUBSYSTEM_DIM
) -> ReducedDensityMatrix:
    """Density matrix over ``target_sites`` with other features pinned.

    ``conditions`` maps feature index to its rescaled value in [0, 1]; the
    projector onto that value's encoding is inserted at the feature during
    contraction. Raises :class:`ConditioningError` when the conditioned
    configuration has (near-)zero probability under the model.
    """
    target_sites = tuple(int(s) for s in target_sites)
    conditions = {int(s): float(v) for s, v in conditions.items()}
    _check_subsystem(model, target_sites, max_dim)
    overlap = set(target_sites) & set(conditions)
    if overlap:
        raise DataError(f"features {sorted(overlap)} are both targets and conditions")
    n_features = model.n_sites if isinstance(model, MpsModel) else model.n_features
    for s, v in conditions.items():
        if not 0 <= s < n_features:
            raise DataError(f"condition feature {s} out of range (model has {n_features})")
        if not 0.0 <= v <= 1.0:
            raise DataError(f"condition value {v} for feature {s} outside [0, 1]")
    if isinstance(model, MpsModel):
        return _mps_rdm(model, target_sites, conditions, max_dim)
    if isinstance(model, TtnModel):
        return _ttn_rdm(model, target_sites, conditions, max_dim)
    raise DataError(f"unsupported model type {type(model).__name__}")


# ---------------------------------------------------------------------------
# quasi-density, moments, entropies


def _density_on_grid(rdm: ReducedDensityMatrix, axes_points) -> np.ndarray:
    """Quasi-density evaluated on a tensor grid (one point array per site)."""
    n = rdm.phys_dim
    k = rdm.n_sites
    bases = [orthonormal_basis(n, pts).T for pts in axes_points]  # (n_pts, N) each
    tensor = rdm.matrix.reshape((n,) * (2 * k))
    ket = _SYMBOLS[:k]
    bra = _SYMBOLS[k : 2 * k]
    grid = _SYMBOLS[2 * k : 3 * k]
    subs = [ket + bra] + [grid[i] + ket[i] for i in range(k)] + [
        grid[i] + bra[i] for i in range(k)
    ]
    expr = ",".join(subs) + "->" + grid
    return np.einsum(expr, tensor, *bases, *bases, optimize=True)


def _quadrature(rdm: ReducedDensityMatrix):
    nodes, weights = gauss_legendre_unit(2 * rdm.phys_dim)
    values = _density_on_grid(rdm, [nodes] * rdm.n_sites)
    return nodes, weights, values


def quasi_density(rdm: ReducedDensityMatrix, point) -> float:
    """Normalized quasi-probability density at a rescaled-domain point.

    The normalizer is the Gauss-Legendre quadrature integral of the
    unnormalized density over the unit cube, which the node count makes
    exact for the polynomial integrand.
    """
    point = np.atleast_1d(np.asarray(point, dtype=np.float64))
    if point.shape != (rdm.n_sites,):
        raise DataError(f"point has shape {point.shape}, expected ({rdm.n_sites},)")
    if np.any(point < 0.0) or np.any(point > 1.0):
        raise DataError("quasi-density points live in the rescaled domain [0, 1]")
    nodes, weights, values = _quadrature(rdm)
    w = weights
    for _ in range(rdm.n_sites - 1):
        w = np.multiply.outer(w, weights)
    total = float((w * values).sum())
    vec = orthonormal_basis(rdm.phys_dim, point[0])
    for x in point[1:]:
        vec = np.kron(vec, orthonormal_basis(rdm.phys_dim, x))
    return float(vec @ rdm.matrix @ vec) / total


def marginal_moments(rdm: ReducedDensityMatrix, rescaler=None, max_sites: int = 3) -> MarginalStats:
    """Mean, variance, and covariance of the normalized quasi-density.

    Uses a Gauss-Legendre tensor grid with ``2 * phys_dim`` nodes per axis,
    which integrates the polynomial integrands exactly. ``rescaler`` maps
    the moments back to the raw feature domain.
    """
    if rdm.n_sites > max_sites:
        raise ResourceLimitError(
            f"moments over {rdm.n_sites} features exceed the {max_sites}-site grid budget"
        )
    nodes, weights, values = _quadrature(rdm)
    k = rdm.n_sites
    w = weights
    for _ in range(k - 1):
        w = np.multiply.outer(w, weights)
    wq = w * values
    total = float(wq.sum())
    coords = np.meshgrid(*([nodes] * k), indexing="ij")
    mean = np.array([float((wq * c).sum()) / total for c in coords])
    second = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            second[i, j] = float((wq * coords[i] * coords[j]).sum()) / total
    covariance = second - np.outer(mean, mean)
    covariance = 0.5 * (covariance + covariance.T)
    std = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    raw_mean = raw_std = None
    if rescaler is not None:
        span = np.array(
            [rescaler.maximum[s] - rescaler.minimum[s] for s in rdm.sites]
        )
        raw_mean = np.array(
            [rescaler.inverse_value(s, m) for s, m in zip(rdm.sites, mean)]
        )
        raw_std = std * span
    return MarginalStats(rdm.sites, mean, std, covariance, raw_mean, raw_std)


def von_neumann_entropy(rdm) -> float:
    """Entropy ``-sum(lam * log(lam))`` over the density matrix spectrum.

    Natural logarithm; eigenvalues below 1e-14 are dropped, small negative
    eigenvalues (>= -1e-10) are treated as zero, and anything more negative
    raises :class:`NumericalError`.
    """
    matrix = rdm.matrix if isinstance(rdm, ReducedDensityMatrix) else np.asarray(rdm, float)
    eigenvalues = np.linalg.eigvalsh(matrix)
    if eigenvalues.min() < -1e-10:
        raise NumericalError(
            f"density matrix has eigenvalue {eigenvalues.min():.3e} < -1e-10"
        )
    lam = eigenvalues[eigenvalues > 1e-14]
    return max(float(-(lam * np.log(lam)).sum()), 0.0)


def mutual_information(model, sites_x, sites_y, max_dim: int = DEFAULT_MAX_SUBSYSTEM_DIM) -> float:
    """Mutual information ``S(X) + S(Y) - S(XY)`` between feature groups."""
    sites_x = tuple(int(s) for s in sites_x)
    sites_y = tuple(int(s) for s in sites_y)
    if set(sites_x) & set(sites_y):
        raise DataError("mutual information needs disjoint feature groups")
    s_x = von_neumann_entropy(reduced_density_matrix(model, sites_x, max_dim))
    s_y = von_neumann_entropy(reduced_density_matrix(model, sites_y, max_dim))
    s_xy = von_neumann_entropy(
        reduced_density_matrix(model, tuple(sorted(sites_x + sites_y)), max_dim)
    )
    return s_x + s_y - s_xy


# ---------------------------------------------------------------------------
# all-to-all mutual information (single-site pairs, structure-aware paths)


def _mps_single_and_pair_rdms(model: MpsModel):
    work = model.copy()
    work.canonicalize(0)
    n = model.phys_dim
    length = model.n_sites
    singles: list[np.ndarray] = []
    pair_entropy = np.zeros((length, length))
    single_entropy = np.zeros(length)
    for i in range(length):
        work.canonicalize(i)
        core = work.cores[i]
        rho_i = np.einsum("lpr,lqr->pq", core, core)
        singles.append(0.5 * (rho_i + rho_i.T))
        single_entropy[i] = von_neumann_entropy(singles[i] / np.trace(singles[i]))
        # march a two-open-leg object to every j > i; sites between are
        # marginalized, sites right of j close to the identity
        obj = np.einsum("lpr,lqs->pqrs", core, core)
        for j in range(i + 1, length):
            other = work.cores[j]
            rho = np.einsum("pqrs,rat,sbt->paqb", obj, other, other, optimize=True)
            rho = rho.reshape(n * n, n * n)
            rho = 0.5 * (rho + rho.T)
            pair_entropy[i, j] = von_neumann_entropy(rho / np.trace(rho))
            if j < length - 1:
                obj = np.einsum("pqrs,rat,sau->pqtu", obj, other, other, optimize=True)
    return single_entropy, pair_entropy


def _ttn_single_and_pair_entropies(model: TtnModel):
    work = _analysis_copy(model)
    work.canonicalize(0)
    n = work.phys_dim

    # downward bond densities: the rest of the tree seen from each parent bond
    down: dict[int, np.ndarray] = {}
    for u in range(work.n_nodes):
        if work.children[u] is None:
            continue
        c0, c1 = work.children[u]
        t = work.tensors[u]
        if work.parents[u] < 0:
            down[c0] = np.einsum("lr,mr->lm", t, t)
            down[c1] = np.einsum("lr,ls->rs", t, t)
        else:
            e = down[u]
            down[c0] = np.einsum("dD,dlr,DLr->lL", e, t, t, optimize=True)
            down[c1] = np.einsum("dD,dlr,DlR->rR", e, t, t, optimize=True)

    # upward messages with one open feature: (p, pbar, bond, bondbar)
    real = [f for f in range(work.padded_features) if f < work.n_features]
    up: dict[tuple[int, int], np.ndarray] = {}
    feats_below: dict[int, list[int]] = {}
    for u in reversed(range(work.n_nodes)):
        t = work.tensors[u]
        if work.children[u] is None:
            f0, f1 = work.leaf_features[u]
            feats_below[u] = [f for f in (f0, f1) if f in real]
            if f0 in real:
                up[(u, f0)] = np.einsum("dpc,DPc->pPdD", t, t, optimize=True)
            if f1 in real:
                up[(u, f1)] = np.einsum("dcp,DcP->pPdD", t, t, optimize=True)
        elif work.parents[u] >= 0:
            c0, c1 = work.children[u]
            feats_below[u] = feats_below[c0] + feats_below[c1]
            for f in feats_below[c0]:
                up[(u, f)] = np.einsum("pPlL,dlr,DLr->pPdD", up[(c0, f)], t, t, optimize=True)
            for f in feats_below[c1]:
                up[(u, f)] = np.einsum("pPrR,dlr,DlR->pPdD", up[(c1, f)], t, t, optimize=True)

    length = work.n_features
    single_entropy = np.zeros(length)
    leaf_of = {f: work.leaf_of_feature(f)[0] for f in range(length)}
    for f in range(length):
        leaf = leaf_of[f]
        rho = np.einsum("dD,pPdD->pP", down[leaf], up[(leaf, f)], optimize=True)
        rho = 0.5 * (rho + rho.T)
        single_entropy[f] = von_neumann_entropy(rho / np.trace(rho))

    # ancestors for LCA lookup
    depth = [0] * work.n_nodes
    for u in range(1, work.n_nodes):
        depth[u] = depth[work.parents[u]] + 1

    def lca(a: int, b: int) -> int:
        while a != b:
            if depth[a] >= depth[b]:
                a = work.parents[a]
            else:
                b = work.parents[b]
        return a

    pair_entropy = np.zeros((length, length))
    for fi in range(length):
        for fj in range(fi + 1, length):
            li, lj = leaf_of[fi], leaf_of[fj]
            if li == lj:
                t = work.tensors[li]
                rho = np.einsum("dD,dpq,DPQ->pqPQ", down[li], t, t, optimize=True)
            else:
                w = lca(li, lj)
                c0, c1 = work.children[w]
                # in-order leaf layout puts the smaller feature in the left subtree
                mi = up[(c0, fi)]
                mj = up[(c1, fj)]
                t = work.tensors[w]
                if work.parents[w] < 0:
                    rho = np.einsum(
                        "lr,LR,pPlL,qQrR->pqPQ", t, t, mi, mj, optimize=True
                    )
                else:
                    rho = np.einsum(
                        "dD,dlr,DLR,pPlL,qQrR->pqPQ", down[w], t, t, mi, mj, optimize=True
                    )
            rho = rho.reshape(n * n, n * n)
            rho = 0.5 * (rho + rho.T)
            pair_entropy[fi, fj] = von_neumann_entropy(rho / np.trace(rho))
    return single_entropy, pair_entropy


def all_to_all_mi(model) -> MiMatrices:
    """Mutual information between every pair of single features.

    Returns the raw matrix (symmetric, zero diagonal) and a display variant
    rescaled to [0, 1] by the largest off-diagonal entry.
    """
    if isinstance(model, MpsModel):
        single, pair = _mps_single_and_pair_rdms(model)
    elif isinstance(model, TtnModel):
        single, pair = _ttn_single_and_pair_entropies(model)
    else:
        raise DataError(f"unsupported model type {type(model).__name__}")
    length = len(single)
    raw = np.zeros((length, length))
    for i in range(length):
        for j in range(i + 1, length):
            value = single[i] + single[j] - pair[i, j]
            raw[i, j] = raw[j, i] = value
    peak = raw.max()
    # below 1e-12 nats everything is rounding noise, not structure
    display = raw / peak if peak > 1e-12 else np.zeros_like(raw)
    np.fill_diagonal(display, 0.0)
    return MiMatrices(raw=raw, display=display)


# ---------------------------------------------------------------------------
# per-sample explanations


def _single_site_rdms(model) -> list[np.ndarray]:
    """All single-feature density matrices, via the cheap structured paths."""
    if isinstance(model, MpsModel):
        work = model.copy()
        out = []
        for i in range(model.n_sites):
            work.canonicalize(i)
            core = work.cores[i]
            rho = np.einsum("lpr,lqr->pq", core, core)
            rho = 0.5 * (rho + rho.T)
            out.append(rho / np.trace(rho))
        return out
    if isinstance(model, TtnModel):
        work = _analysis_copy(model)
        work.canonicalize(0)
        down: dict[int, np.ndarray] = {}
        for u in range(work.n_nodes):
            if work.children[u] is None:
                continue
            c0, c1 = work.children[u]
            t = work.tensors[u]
            if work.parents[u] < 0:
                down[c0] = np.einsum("lr,mr->lm", t, t)
                down[c1] = np.einsum("lr,ls->rs", t, t)
            else:
                e = down[u]
                down[c0] = np.einsum("dD,dlr,DLr->lL", e, t, t, optimize=True)
                down[c1] = np.einsum("dD,dlr,DlR->rR", e, t, t, optimize=True)
        out = []
        for f in range(work.n_features):
            leaf, slot = work.leaf_of_feature(f)
            t = work.tensors[leaf]
            if slot == 1:
                rho = np.einsum("dpc,DPc,dD->pP", t, t, down[leaf], optimize=True)
            else:
                rho = np.einsum("dcp,DcP,dD->pP", t, t, down[leaf], optimize=True)
            rho = 0.5 * (rho + rho.T)
            out.append(rho / np.trace(rho))
        return out
    raise DataError(f"unsupported model type {type(model).__name__}")


def _require_encoder(model):
    if model.encoder is None or model.encoder.rescaler is None:
        raise DataError("model carries no fitted feature map; attach one via model.encoder")
    return model.encoder


def flag_features(model, raw_sample, k_sigma: float = 1.0) -> AnomalyExplanation:
    """Score a sample and flag features deviating from their learned marginal.

    A feature is flagged when its rescaled value is more than ``k_sigma``
    expected standard deviations away from the expected value of the
    model's single-feature marginal. Choosing ``k_sigma`` is task and
    domain dependent; 1.0 is a sensible starting point, not a rule.
    """
    if k_sigma <= 0:
        raise DataError(f"k_sigma must be positive, got {k_sigma}")
    encoder = _require_encoder(model)
    raw = np.asarray(raw_sample, dtype=np.float64)
    encoded = encoder.encode_sample(raw)
    log_abs, _ = model.log_amplitude(encoded)
    nll = float(-2.0 * log_abs)
    rescaled = encoder.rescaler.transform(raw)

    flags = []
    for i, rho in enumerate(_single_site_rdms(model)):
        rdm = ReducedDensityMatrix((i,), rho, model.phys_dim, 1.0)
        stats = marginal_moments(rdm, encoder.rescaler)
        deviation = abs(float(rescaled[i]) - float(stats.mean[0]))
        flags.append(
            FeatureFlag(
                index=i,
                observed=float(raw[i]),
                mean=float(stats.raw_mean[0]),
                std=float(stats.raw_std[0]),
                flagged=bool(deviation > k_sigma * float(stats.std[0])),
                observed_rescaled=float(rescaled[i]),
                mean_rescaled=float(stats.mean[0]),
                std_rescaled=float(stats.std[0]),
            )
        )
    return AnomalyExplanation(sample_id=0, nll=nll, k_sigma=k_sigma, features=flags)


def conditional_expectations(model, raw_sample, flagged) -> dict[int, float | None]:
    """Expected raw value of each flagged feature, conditioned on the rest.

    All unflagged features are pinned to their observed (rescaled) values
    and the mean of the resulting conditional marginal is mapped back to
    the raw domain. A feature whose conditioning fails (impossible
    configuration under the model) maps to None; the others are still
    returned. The conditional expectation may legitimately fall outside
    the feature's marginal one-sigma band; no adjustment is applied.
    """
    encoder = _require_encoder(model)
    raw = np.asarray(raw_sample, dtype=np.float64)
    rescaled = encoder.rescaler.transform(raw)
    flagged = sorted(int(f) for f in flagged)
    if not flagged:
        raise DataError("conditional expectations need at least one flagged feature")
    conditions_all = {
        i: float(rescaled[i]) for i in range(len(raw)) if i not in set(flagged)
    }
    out: dict[int, float | None] = {}
    for f in flagged:
        try:
            rdm = conditional_rdm(model, (f,), conditions_all)
            stats = marginal_moments(rdm, encoder.rescaler)
            out[f] = float(stats.raw_mean[0])
        except ConditioningError as exc:
            logger.warning("conditioning failed for feature %d: %s", f, exc)
            out[f] = None
    return out


def explain_sample(
    model,
    raw_sample,
    k_sigma: float = 1.0,
    sample_id: int = 0,
    with_conditionals: bool = True,
) -> AnomalyExplanation:
    """Full per-sample report: score, flags, and conditional expectations."""
    explanation = flag_features(model, raw_sample, k_sigma)
    explanation.sample_id = sample_id
    flagged = explanation.flagged_indices()
    if with_conditionals and flagged:
        expected = conditional_expectations(model, raw_sample, flagged)
        for feature in explanation.features:
            if feature.index in expected:
                feature.conditional_expected = expected[feature.index]
    return explanation
