"""Expected-loss values and gradients for lattice distributions.

Exact oracles enumerate paths (or run a single first-order backward pass
for edge-additive losses); the sampled estimators approximate the same
quantities from Monte Carlo paths, with an optional variance-reduction
baseline that is exactly invariant to additive loss shifts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .compose import path_occupancy
from .errors import DegenerateLatticeError
from .fst import NEG_INF, Path, Wfst, enumerate_paths, topological_order
from .losses import ShiftedLoss
from .sampling import SampleStream, sample_paths

MAX_RECORDED_LOSSES = 1_000_000


@dataclass(eq=False)
class MbrEstimate:
    """Expected loss, its gradient w.r.t. the score matrix, and diagnostics."""

    expected_loss: float
    gradient: np.ndarray
    num_samples: int
    per_sample_losses: np.ndarray
    loss_mean: float
    loss_variance: float
    seed: int


def _enumerated_distribution(
    fst: Wfst, max_paths: int
) -> tuple[list[Path], np.ndarray]:
    """All paths with their normalized probabilities."""
    paths = enumerate_paths(fst, max_paths)
    if not paths:
        raise DegenerateLatticeError("no complete path")
    log_weights = np.array([p.log_weight for p in paths])
    m = log_weights.max()
    if m == NEG_INF:
        raise DegenerateLatticeError("all paths have zero weight")
    probs = np.exp(log_weights - m)
    probs /= probs.sum()
    return paths, probs


def expected_loss_exact(fst: Wfst, loss, max_paths: int = 10_000) -> float:
    """Expected path loss by full enumeration of the lattice."""
    paths, probs = _enumerated_distribution(fst, max_paths)
    return float(sum(p * loss(fst, path) for path, p in zip(paths, probs)))


def expected_loss_gradient_exact(
    fst: Wfst,
    loss,
    num_frames: int,
    num_symbols: int,
    max_paths: int = 10_000,
) -> np.ndarray:
    """Exact gradient of the expected loss w.r.t. the (T, Q) score matrix.

    The expected loss of a globally normalized distribution has gradient
    E[L * dlogw/dz] - E[L] * E[dlogw/dz], a covariance between the scalar
    loss and the occupancy matrix; both expectations are taken exactly
    over the enumerated paths.
    """
    paths, probs = _enumerated_distribution(fst, max_paths)
    losses = np.array([loss(fst, p) for p in paths])
    gammas = np.stack(
        [path_occupancy(fst, p, num_frames, num_symbols) for p in paths]
    )
    mean_loss = float(probs @ losses)
    mean_gamma = np.tensordot(probs, gammas, axes=1)
    loss_gamma = np.tensordot(probs * losses, gammas, axes=1)
    return loss_gamma - mean_loss * mean_gamma


def expected_additive_loss(
    fst: Wfst, edge_losses: Mapping[int, float] | Sequence[float] | np.ndarray
) -> tuple[float, float]:
    """Expected value of an edge-additive loss in one backward pass.

    ``edge_losses`` maps edge id to a per-edge loss term whose sum along a
    path equals the path loss.  The pass carries (log-weight, expected
    suffix loss) pairs, a first-order expectation-semiring accumulation
    kept in normalized form so only ratios of weights are exponentiated.
    Returns (log partition function, expected loss).
    """
    if isinstance(edge_losses, Mapping):
        costs = np.zeros(fst.num_edges)
        for k, v in edge_losses.items():
            costs[k] = v
    else:
        costs = np.asarray(edge_losses, dtype=float)
        if costs.shape != (fst.num_edges,):
            raise ValueError(
                f"edge losses have shape {costs.shape}, "
                f"expected ({fst.num_edges},)"
            )
    order = topological_order(fst)
    beta = np.full(fst.num_states, NEG_INF)
    suffix = np.zeros(fst.num_states)
    beta[fst.final] = 0.0
    for q in reversed(order):
        if q == fst.final:
            continue
        ids = fst.out_edge_ids(q)
        if not ids:
            continue
        vals = [fst.edges[k].log_weight + beta[fst.edges[k].dst] for k in ids]
        m = max(vals)
        if m == NEG_INF:
            continue
        beta[q] = m + math.log(sum(math.exp(v - m) for v in vals))
        total = 0.0
        for k, v in zip(ids, vals):
            if v == NEG_INF:
                continue
            dst = fst.edges[k].dst
            total += math.exp(v - beta[q]) * (costs[k] + suffix[dst])
        suffix[q] = total
    if beta[fst.initial] == NEG_INF:
        raise DegenerateLatticeError(
            "no positive-weight path from the initial state"
        )
    return float(beta[fst.initial]), float(suffix[fst.initial])


def sampled_estimate(
    fst: Wfst,
    loss,
    num_frames: int,
    num_symbols: int,
    num_samples: int,
    stream: SampleStream | int,
    start_index: int = 0,
    variance_reduction: bool = True,
) -> MbrEstimate:
    """Monte Carlo estimate of the expected loss and its score gradient.

    The expected loss is the mean loss over ``num_samples`` sampled paths.
    With variance reduction the gradient is I/(I-1) times the sample
    covariance between losses and occupancy matrices; the baseline is
    computed from min-shifted losses, which leaves the value unchanged in
    exact arithmetic and makes the result bit-for-bit invariant to any
    additive loss offset that keeps the shifted losses exactly
    representable.  For a single sample the covariance is undefined and
    the gradient is the zero matrix.

    Without variance reduction the gradient is mean_i L_i (G_i - Gbar)
    where Gbar is the mean occupancy of an independent second batch of
    ``num_samples`` paths (stream indices start_index + num_samples
    onward); independence keeps the estimate unbiased, at the cost of
    sensitivity to loss offsets.
    """
    if isinstance(stream, int):
        stream = SampleStream(stream)
    if num_samples < 1:
        raise ValueError("num_samples must be positive")
    paths = sample_paths(fst, stream, num_samples, start_index)
    losses = np.array([loss(fst, p) for p in paths])
    gammas = np.stack(
        [path_occupancy(fst, p, num_frames, num_symbols) for p in paths]
    )
    count = num_samples
    if variance_reduction:
        if count == 1:
            gradient = np.zeros((num_frames, num_symbols))
        else:
            shifted = losses - losses.min()
            centered = shifted - shifted.mean()
            gradient = np.tensordot(centered, gammas, axes=1) / (count - 1)
    else:
        baseline_paths = sample_paths(
            fst, stream, count, start_index + count
        )
        baseline = np.mean(
            [
                path_occupancy(fst, p, num_frames, num_symbols)
                for p in baseline_paths
            ],
            axis=0,
        )
        gradient = np.tensordot(losses, gammas - baseline, axes=1) / count
    mean = float(losses.mean())
    variance = float(losses.var(ddof=1)) if count > 1 else 0.0
    return MbrEstimate(
        expected_loss=mean,
        gradient=gradient,
        num_samples=count,
        per_sample_losses=losses[:MAX_RECORDED_LOSSES],
        loss_mean=mean,
        loss_variance=variance,
        seed=stream.seed,
    )


def loss_shift_check(
    fst: Wfst,
    loss,
    num_frames: int,
    num_symbols: int,
    num_samples: int,
    seed: int,
    shift: float,
    variance_reduction: bool = True,
) -> bool:
    """True iff shifting the loss by a constant leaves the gradient bits unchanged."""
    base = sampled_estimate(
        fst,
        loss,
        num_frames,
        num_symbols,
        num_samples,
        SampleStream(seed),
        variance_reduction=variance_reduction,
    )
    moved = sampled_estimate(
        fst,
        ShiftedLoss(loss, shift),
        num_frames,
        num_symbols,
        num_samples,
        SampleStream(seed),
        variance_reduction=variance_reduction,
    )
    return base.gradient.tobytes() == moved.gradient.tobytes()


def estimate_report(estimate: MbrEstimate) -> dict:
    """JSON-serializable summary of an estimate (gradient in row-major order)."""
    return {
        "expected_loss": estimate.expected_loss,
        "gradient": [float(g) for g in estimate.gradient.ravel()],
        "gradient_shape": list(estimate.gradient.shape),
        "num_samples": estimate.num_samples,
        "loss_mean": estimate.loss_mean,
        "loss_variance": estimate.loss_variance,
        "seed": estimate.seed,
    }
