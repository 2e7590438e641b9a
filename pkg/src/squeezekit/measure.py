"""Projective measurement sampling and shot-noise cost estimators.

The estimator side deliberately sees nothing but bitstrings: the cost of a
parameter point is assembled from sampled shots exactly as an experiment
would do it, with the squeezing estimate xi2_hat = N <J_y^2> / <J_x>^2 and
an optional smooth penalty on loss of interferometric contrast.

Basis convention for sampling (fixed here, used by every caller): to
measure all spins along x the state is rotated by R_y(-pi/2), along y by
R_x(+pi/2); bit value 1 in the resulting z measurement means outcome +1/2
for the chosen component.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import statevec
from .errors import InvalidArgumentError, UnstableEstimateError
from .statevec import StateVector

__all__ = [
    "LARGE_COST",
    "ShotBatch",
    "CostEstimate",
    "sample_shots",
    "estimate_cost",
    "penalty_fp",
    "default_x_bar",
    "relative_error_analytic",
    "empirical_relative_error",
]

# Sentinel cost for a degenerate denominator; keeps optimizers running
# instead of aborting on bad parameter regions.
LARGE_COST = 1.0e6

_BASIS_ROTATION = {"x": ("y", -np.pi / 2.0), "y": ("x", np.pi / 2.0)}


@dataclass
class ShotBatch:
    """Projective outcomes of one measurement setting.

    bits is (n_shots, N) with 0/1 entries; 1 means the measured component
    was +1/2 on that spin.
    """

    basis: str
    bits: np.ndarray
    seed: object

    @property
    def n_shots(self) -> int:
        return self.bits.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.bits.shape[1]

    def half_magnetizations(self) -> np.ndarray:
        """Per-shot collective component (n_up - n_down)/2."""
        return self.bits.sum(axis=1) - self.n_atoms / 2.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# squeezekit-schema v1\n")
            fh.write(f"# basis={self.basis} seed={self.seed}\n")
            writer = csv.writer(fh)
            writer.writerows(self.bits.tolist())


@dataclass
class CostEstimate:
    """Shot-based squeezing estimate plus optional contrast penalty."""

    xi2_hat: float
    mean_jx_hat: float
    mean_jy2_hat: float
    n_shots_used: int
    penalty_value: float
    degenerate: bool = False

    @property
    def cost(self) -> float:
        return self.xi2_hat + self.penalty_value


def sample_shots(state: StateVector, basis: str, n_shots: int, seed) -> ShotBatch:
    """Sample bitstrings of a simultaneous single-basis measurement.

    A copy of the state is rotated so the requested component maps onto z,
    then indices are drawn from the exact |amplitude|^2 distribution by
    inverse CDF with a deterministic seeded RNG.  ``seed`` may be an int,
    a SeedSequence or a Generator.
    """
    if basis not in _BASIS_ROTATION:
        raise InvalidArgumentError("basis must be 'x' or 'y'")
    if n_shots < 1:
        raise InvalidArgumentError("n_shots must be >= 1")
    axis, angle = _BASIS_ROTATION[basis]
    work = state.copy()
    statevec.apply_rotation(work, axis, angle)
    p = np.abs(work.amps) ** 2
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    draws = np.searchsorted(cdf, rng.random(n_shots), side="right")
    bits = (
        (draws[:, None] >> np.arange(state.n_atoms, dtype=np.uint32)) & 1
    ).astype(np.uint8)
    return ShotBatch(basis=basis, bits=bits, seed=seed)


def default_x_bar(n_atoms: int) -> float:
    """Contrast threshold N/sqrt(8) below which the penalty switches on."""
    return n_atoms / np.sqrt(8.0)


def penalty_fp(x: float, x_bar: float) -> float:
    """Smooth contrast penalty: exp(1/(x - x_bar)) for 0 < x < x_bar, else 0.

    Decreases with growing contrast and vanishes continuously at x_bar.
    """
    if 0.0 < x < x_bar:
        return float(np.exp(1.0 / (x - x_bar)))
    return 0.0


def estimate_cost(
    x_batch: ShotBatch,
    y_batch: ShotBatch,
    penalty: bool = False,
    x_bar: float = None,
    eps_j: float = None,
) -> CostEstimate:
    """Assemble xi2_hat = N <J_y^2> / <J_x>^2 from one x and one y batch.

    <J_x> is the mean half-magnetization of the x shots, <J_y^2> the mean
    squared half-magnetization of the y shots.  When |<J_x>| falls below
    ``eps_j`` (default 1e-6 N) the estimate is flagged degenerate and
    xi2_hat is the LARGE_COST sentinel.  With ``penalty`` enabled the
    contrast penalty is evaluated on the same <J_x> estimator.
    """
    if x_batch.basis != "x" or y_batch.basis != "y":
        raise InvalidArgumentError("estimate_cost needs an x batch and a y batch")
    if x_batch.n_atoms != y_batch.n_atoms:
        raise InvalidArgumentError("batches disagree on atom number")
    n = x_batch.n_atoms
    if x_bar is None:
        x_bar = default_x_bar(n)
    if eps_j is None:
        eps_j = 1e-6 * n

    jx_hat = float(x_batch.half_magnetizations().mean())
    jy2_hat = float((y_batch.half_magnetizations() ** 2).mean())
    n_used = x_batch.n_shots + y_batch.n_shots
    pen = penalty_fp(abs(jx_hat), x_bar) if penalty else 0.0

    if abs(jx_hat) < eps_j:
        return CostEstimate(
            xi2_hat=LARGE_COST,
            mean_jx_hat=jx_hat,
            mean_jy2_hat=jy2_hat,
            n_shots_used=n_used,
            penalty_value=pen,
            degenerate=True,
        )
    xi2_hat = n * jy2_hat / jx_hat**2
    return CostEstimate(
        xi2_hat=xi2_hat,
        mean_jx_hat=jx_hat,
        mean_jy2_hat=jy2_hat,
        n_shots_used=n_used,
        penalty_value=pen,
    )


def relative_error_analytic(n_atoms: int) -> float:
    """Squared single-shot relative error of xi2_hat on the reference state.

    2 (N^2 + 2N - 4) / (N (N + 2)); approaches 2 for large N, so the shot
    count needed at fixed precision does not grow with N.
    """
    if n_atoms < 2 or n_atoms % 2 != 0:
        raise InvalidArgumentError("formula defined for even N >= 2")
    n = float(n_atoms)
    return 2.0 * (n * n + 2.0 * n - 4.0) / (n * (n + 2.0))


def empirical_relative_error(
    state: StateVector,
    shots_per_estimate: int,
    n_repeats: int,
    seed: int,
) -> float:
    """Monte Carlo relative error of xi2_hat, rescaled to a per-shot figure.

    Repeats the estimator n_repeats times with independent RNG streams
    (SeedSequence spawn by repeat index), each repeat using
    shots_per_estimate shots in the x basis plus the same number in y.
    Returns std(xi2_hat)/mean(xi2_hat) * sqrt(shots_per_estimate): the
    square of the returned figure is comparable to
    :func:`relative_error_analytic`.  Degenerate repeats are excluded;
    more than 10% exclusions raises UnstableEstimateError.
    """
    if shots_per_estimate < 1 or n_repeats < 2:
        raise InvalidArgumentError("need shots_per_estimate >= 1 and n_repeats >= 2")
    root = np.random.SeedSequence(seed)
    streams = root.spawn(n_repeats)
    values = []
    n_degenerate = 0
    for ss in streams:
        ss_x, ss_y = ss.spawn(2)
        xb = sample_shots(state, "x", shots_per_estimate, ss_x)
        yb = sample_shots(state, "y", shots_per_estimate, ss_y)
        est = estimate_cost(xb, yb)
        if est.degenerate:
            n_degenerate += 1
        else:
            values.append(est.xi2_hat)
    if n_degenerate > 0.1 * n_repeats:
        raise UnstableEstimateError(
            f"{n_degenerate}/{n_repeats} repeats had a degenerate denominator"
        )
    values = np.asarray(values)
    return float(values.std(ddof=1) / values.mean() * np.sqrt(shots_per_estimate))
