"""Two-site negative-log-likelihood training, generic over MPS and TTN.

The loop walks the network's sweep schedule; at every directed edge the
two adjacent tensors are merged, updated with a few steps of (stochastic)
projected gradient descent on the NLL, then split by a truncated SVD that
adapts the bond dimension and moves the canonical center along the edge.

The per-sample gradient of the amplitude with respect to the merged
tensor is the outer product of the environment factor vectors; both the
factors and the amplitude are computed with per-sample log-scale
renormalization, and the ratio gradient/amplitude is formed from the
rescaled quantities directly so the scales cancel.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateInputError, NumericalError

logger = logging.getLogger(__name__)

__all__ = ["TrainConfig", "StepStats", "TrainReport", "nll_loss", "two_site_gradient",
           "two_site_step", "fit"]

_LOG_FLOOR = -700.0


@dataclass
class TrainConfig:
    """Hyper-parameters of the two-site training loop.

    ``batch_size=None`` means full-batch gradients; otherwise a fresh
    mini-batch is drawn (without replacement) for every edge step.
    ``zero_amplitude_policy`` decides how samples with exactly vanishing
    amplitude enter losses and gradients: ``"skip"`` excludes them (with a
    logged count), ``"clamp"`` floors their log amplitude instead.
    """

    learning_rate: float = 1e-2
    lr_decay: float = 0.9
    inner_steps: int = 5
    batch_size: int | None = 256
    sweeps: int = 10
    svd_rel_threshold: float = 1e-4
    max_bond: int = 40
    seed: int = 0
    zero_amplitude_policy: str = "skip"

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 0.5:
            raise DataError(f"learning_rate must lie in (0, 0.5], got {self.learning_rate}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise DataError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        if self.inner_steps < 1:
            raise DataError("inner_steps must be >= 1")
        if self.sweeps < 0:
            raise DataError("sweeps must be >= 0")
        if not 0.0 <= self.svd_rel_threshold < 1.0:
            raise DataError("svd_rel_threshold must lie in [0, 1)")
        if self.max_bond < 1:
            raise DataError("max_bond must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise DataError("batch_size must be >= 1 or None for full batch")
        if self.zero_amplitude_policy not in ("skip", "clamp"):
            raise DataError(f"unknown zero_amplitude_policy {self.zero_amplitude_policy!r}")


@dataclass
class StepStats:
    """Outcome of one two-site edge update."""

    edge: tuple
    discarded_weight: float
    loss_before: float
    loss_after: float
    skipped_samples: int = 0
    error: str | None = None


@dataclass
class TrainReport:
    """Trace of a :func:`fit` run."""

    nll_trace: list[float] = field(default_factory=list)
    discarded_weights: list[list[float]] = field(default_factory=list)
    bond_profile: list[int] = field(default_factory=list)
    seconds_per_sweep: list[float] = field(default_factory=list)
    zero_amplitude_skips: int = 0
    step_errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "nll_trace": self.nll_trace,
            "discarded_weights": self.discarded_weights,
            "bond_profile": self.bond_profile,
            "seconds_per_sweep": self.seconds_per_sweep,
            "zero_amplitude_skips": self.zero_amplitude_skips,
            "step_errors": self.step_errors,
        }


def nll_loss(model, encoded: np.ndarray, zero_amplitude_policy: str = "skip") -> float:
    """Mean negative log-likelihood of a batch under the Born rule.

    ``log P(x) = 2 log |amplitude(x)|`` for a unit-norm model. Samples with
    exactly zero amplitude are excluded ("skip") or floored ("clamp").
    """
    encoded = np.asarray(encoded, dtype=np.float64)
    if encoded.size == 0:
        raise DataError("nll_loss needs a non-empty batch")
    log_abs, _ = model.log_amplitudes(encoded)
    if zero_amplitude_policy == "clamp":
        log_abs = np.maximum(log_abs, _LOG_FLOOR)
    finite = np.isfinite(log_abs)
    n_skipped = int(encoded.shape[0] - finite.sum())
    if n_skipped:
        logger.warning("nll_loss: skipped %d zero-amplitude samples", n_skipped)
    if not finite.any():
        raise NumericalError("all samples have zero amplitude under the model")
    return float(-2.0 * log_abs[finite].mean())


def _combine_factors(factor_list) -> np.ndarray:
    """Row-wise Kronecker product of per-sample factors: (n, prod of dims)."""
    combined = factor_list[0]
    for factor in factor_list[1:]:
        combined = (combined[:, :, None] * factor[:, None, :]).reshape(combined.shape[0], -1)
    return combined


def _split_factors(factor_list) -> int:
    """Split index balancing the two combined factor widths."""
    dims = [f.shape[1] for f in factor_list]
    total = float(np.prod(dims))
    best, best_score = 1, float("inf")
    running = 1.0
    for s in range(1, len(dims)):
        running *= dims[s - 1]
        score = max(running, total / running)
        if score < best_score:
            best, best_score = s, score
    return best


def _contract_fractions(merged: np.ndarray, factor_list) -> np.ndarray:
    """Per-sample rescaled amplitude ``<merged, outer(factors_b)>``.

    Formed as one matrix product over a balanced bipartition of the factor
    axes, which keeps the cost at a single GEMM instead of a chain of
    batched outer products.
    """
    s = _split_factors(factor_list)
    left = _combine_factors(factor_list[:s])
    right = _combine_factors(factor_list[s:])
    matrix = merged.reshape(left.shape[1], right.shape[1])
    return ((left @ matrix) * right).sum(axis=1)


def _gradient_from_factors(
    merged: np.ndarray, factor_list, zero_amplitude_policy: str
) -> tuple[np.ndarray, np.ndarray, int]:
    """NLL gradient with respect to the merged tensor, scales cancelled.

    Returns ``(gradient, fractions, n_skipped)`` where ``fractions`` holds
    the per-sample rescaled amplitudes.
    """
    psi = _contract_fractions(merged, factor_list)
    valid = psi != 0.0
    n_skipped = int(np.count_nonzero(~valid))
    if zero_amplitude_policy == "clamp" and n_skipped:
        tiny = 1e-30
        psi = np.where(valid, psi, tiny)
        valid = np.ones_like(valid)
        n_skipped = 0
    denom = int(valid.sum())
    if denom == 0:
        raise NumericalError("every sample in the batch has zero amplitude")
    weights = np.where(valid, 1.0, 0.0)
    weights[valid] /= psi[valid]
    s = _split_factors(factor_list)
    left = _combine_factors(factor_list[:s])
    right = _combine_factors(factor_list[s:])
    grad_matrix = (left * weights[:, None]).T @ right
    grad = (-2.0 / denom) * grad_matrix.reshape(merged.shape)
    return grad, psi, n_skipped


def _local_nll(psi: np.ndarray, log_scale: np.ndarray, zero_amplitude_policy: str) -> float:
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(psi)) + log_scale
    if zero_amplitude_policy == "clamp":
        log_abs = np.maximum(log_abs, _LOG_FLOOR)
    finite = np.isfinite(log_abs)
    if not finite.any():
        return float("inf")
    return float(-2.0 * log_abs[finite].mean())


def two_site_gradient(
    model,
    edge,
    merged: np.ndarray,
    encoded_batch: np.ndarray,
    zero_amplitude_policy: str = "skip",
) -> np.ndarray:
    """NLL gradient with respect to the merged tensor at ``edge``.

    The model must be in canonical form with its center at one endpoint of
    ``edge`` and ``merged`` must be the corresponding merged tensor (for
    example the output of ``merge_edge``). Environments are built for
    ``encoded_batch`` on the fly; the incremental cache used by
    :func:`fit` produces the same values.
    """
    env = model.environment_cache(np.asarray(encoded_batch, dtype=np.float64))
    factor_list, _ = env.factors(edge)
    grad, _, n_skipped = _gradient_from_factors(merged, factor_list, zero_amplitude_policy)
    if n_skipped:
        logger.warning("two_site_gradient: skipped %d zero-amplitude samples", n_skipped)
    return grad


def two_site_step(model, edge, env, rows, learning_rate: float, config: TrainConfig) -> StepStats:
    """One merge / descend / split update at ``edge`` using cached environments.

    The merged tensor is renormalized after every inner gradient update
    (projected descent on the unit sphere), so no partition-function term
    appears in the gradient. A degenerate split aborts the step: the
    original merged tensor is split exactly instead, which restores the
    state while still moving the center for the rest of the sweep.
    """
    original = model.merge_edge(edge)
    factor_list, log_scale = env.factors(edge, rows)

    merged = original
    skipped = 0
    loss_before = None
    error = None
    for _ in range(config.inner_steps):
        try:
            grad, psi, n_skip = _gradient_from_factors(
                merged, factor_list, config.zero_amplitude_policy
            )
        except NumericalError as exc:
            error = str(exc)
            break
        if loss_before is None:
            loss_before = _local_nll(psi, log_scale, config.zero_amplitude_policy)
        skipped = max(skipped, n_skip)
        merged = merged - learning_rate * grad
        norm = np.linalg.norm(merged)
        if norm == 0.0 or not np.isfinite(norm):
            error = "gradient update produced a degenerate merged tensor"
            break
        merged = merged / norm

    if error is None:
        try:
            discarded = model.split_edge(
                edge, merged, config.svd_rel_threshold, config.max_bond
            )
        except DegenerateInputError as exc:
            error = str(exc)

    if error is not None:
        # restore: exact split of the untouched merged tensor
        model.split_edge(edge, original, 0.0, None)
        env.advance(edge)
        loss = _local_nll(
            _contract_fractions(original, factor_list), log_scale, config.zero_amplitude_policy
        )
        return StepStats(edge, 0.0, loss, loss, skipped, error)

    env.advance(edge)
    after = model.merge_edge(edge)
    loss_after = _local_nll(
        _contract_fractions(after, factor_list), log_scale, config.zero_amplitude_policy
    )
    return StepStats(edge, discarded, loss_before, loss_after, skipped, None)


def fit(model, encoded: np.ndarray, config: TrainConfig) -> TrainReport:
    """Train ``model`` in place on encoded, unlabeled data.

    Runs ``config.sweeps`` full traversals with mini-batches redrawn per
    step from a generator seeded by ``config.seed``; the NLL trace records
    the full-data loss after each sweep. Deterministic given seed, config,
    and data.
    """
    encoded = np.asarray(encoded, dtype=np.float64)
    if encoded.ndim != 3 or encoded.shape[0] == 0:
        raise DataError("fit needs a non-empty (samples, sites, phys_dim) batch")
    report = TrainReport()
    if config.sweeps == 0:
        report.bond_profile = model.bond_profile()
        return report

    model.canonicalize(model.sweep_start())
    model.normalize()
    env = model.environment_cache(encoded)
    schedule = model.sweep_schedule()
    rng = np.random.default_rng(config.seed)
    n = encoded.shape[0]
    draw_batches = config.batch_size is not None and config.batch_size < n
    learning_rate = config.learning_rate

    for sweep in range(config.sweeps):
        started = time.perf_counter()
        discards = []
        for edge in schedule:
            rows = rng.choice(n, size=config.batch_size, replace=False) if draw_batches else None
            stats = two_site_step(model, edge, env, rows, learning_rate, config)
            discards.append(stats.discarded_weight)
            report.zero_amplitude_skips += stats.skipped_samples
            if stats.error is not None:
                message = f"sweep {sweep}, edge {stats.edge}: {stats.error}"
                logger.warning("two-site step aborted (%s)", message)
                report.step_errors.append(message)
        report.discarded_weights.append(discards)
        report.nll_trace.append(nll_loss(model, encoded, config.zero_amplitude_policy))
        report.seconds_per_sweep.append(time.perf_counter() - started)
        learning_rate *= config.lr_decay

    report.bond_profile = model.bond_profile()
    return report
