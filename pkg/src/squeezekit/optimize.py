"""Derivative-free optimization drivers.

Global search is a rectangle-dividing scheme over the normalized unit box:
keep a partition into hyperrectangles with evaluated centers, select the
potentially optimal ones by the lower-right convex hull over (size, value)
with slack eps_dir, and trisect each along one longest coordinate.  Two
documented modifications adapt it to noisy, budgeted cost functions:

* running-mean re-evaluation: under noise the incumbent center is
  re-measured once per iteration and every center keeps a running mean,
  so the reported best is an averaged value rather than a lucky draw;
* optional terminal polish: a trailing fraction of the evaluation budget
  runs a bounded Nelder-Mead simplex from the incumbent, and the polished
  point is accepted only if its re-averaged value beats the incumbent.

The local refiner is scipy's Nelder-Mead with bound clipping, run in unit
coordinates.  Exact (noiseless) optimization chains a coarse global pass
with multi-start refinement and supports warm starts padded with identity
layers, which makes the optimized value non-increasing in circuit depth.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import measure, statevec
from .errors import DegenerateBlochVectorError, InvalidArgumentError
from .lattice import Geometry, InteractionMatrix
from .statevec import ParamVector, default_bounds

__all__ = [
    "OptimizerConfig",
    "OptimizationTrace",
    "DirectResult",
    "RefineResult",
    "direct_search",
    "local_refine",
    "minimize_cost",
    "feedback_loop",
    "exact_optimize",
    "foat_optimal_xi2",
]


@dataclass
class OptimizerConfig:
    """Budgets and knobs shared by the global and local drivers.

    ``total_run_budget`` counts simulated experimental runs; one cost
    evaluation consumes ``shots_per_evaluation`` of them, so noiseless
    optimization uses shots_per_evaluation = 1 and the budget becomes an
    evaluation count.
    """

    bounds: np.ndarray
    total_run_budget: int = 100_000
    shots_per_evaluation: int = 100
    eps_dir: float = 1e-4
    max_subdivisions: int = 40
    noisy: bool = False
    polish_fraction: float = 0.0
    nm_initial_scale: float = 0.1
    nm_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=float)
        if self.bounds.ndim != 2 or self.bounds.shape[1] != 2:
            raise InvalidArgumentError("bounds must be (d, 2)")
        if not np.all(np.isfinite(self.bounds)):
            raise InvalidArgumentError("bounds must be finite")
        if not np.all(self.bounds[:, 1] > self.bounds[:, 0]):
            raise InvalidArgumentError("bounds must be ordered (low < high)")
        if self.total_run_budget < self.shots_per_evaluation:
            raise InvalidArgumentError("budget smaller than one evaluation")
        if not 0.0 <= self.polish_fraction < 1.0:
            raise InvalidArgumentError("polish_fraction must be in [0, 1)")

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def max_evals(self) -> int:
        return self.total_run_budget // self.shots_per_evaluation


class _Rect:
    """One hyperrectangle of the unit-box partition."""

    __slots__ = ("center", "levels", "fsum", "f2sum", "n")

    def __init__(self, center, levels, value):
        self.center = center
        self.levels = levels
        self.fsum = value
        self.f2sum = value * value
        self.n = 1

    def add_sample(self, value):
        self.fsum += value
        self.f2sum += value * value
        self.n += 1

    @property
    def mean(self):
        return self.fsum / self.n

    def stderr(self):
        if self.n < 2:
            return None
        var = max(self.f2sum / self.n - self.mean**2, 0.0)
        return np.sqrt(var / self.n)

    def half_diagonal(self):
        sides2 = 3.0 ** (-2.0 * np.asarray(self.levels, dtype=float))
        return 0.5 * np.sqrt(sides2.sum())


def _potentially_optimal(rects, eps_dir):
    """Representatives of the classic potentially-optimal set, largest first."""
    groups = {}
    for r in rects:
        key = tuple(sorted(r.levels))
        best = groups.get(key)
        if best is None or r.mean < best.mean:
            groups[key] = r
    reps = list(groups.values())
    d = np.array([r.half_diagonal() for r in reps])
    f = np.array([r.mean for r in reps])
    f_min = f.min()
    selected = []
    for idx, rect in enumerate(reps):
        dj, fj = d[idx], f[idx]
        smaller = d < dj - 1e-15
        larger = d > dj + 1e-15
        equal = ~smaller & ~larger
        if fj > f[equal].min() + 1e-15:
            continue
        left = ((fj - f[smaller]) / (dj - d[smaller])).max() if smaller.any() else -np.inf
        right = ((f[larger] - fj) / (d[larger] - dj)).min() if larger.any() else np.inf
        if left > right + 1e-12:
            continue
        if larger.any():
            if f_min != 0.0:
                if (f_min - fj) / abs(f_min) + dj * right / abs(f_min) < eps_dir:
                    continue
            elif fj > dj * right:
                continue
        selected.append(rect)
    selected.sort(key=lambda r: -r.half_diagonal())
    return selected


@dataclass
class DirectResult:
    best_theta: np.ndarray
    best_value: float
    n_evals: int
    runs_used: int
    records: list
    iterations: list
    rectangles: list = field(default_factory=list)
    polish: dict = None


def direct_search(cost, config: OptimizerConfig) -> DirectResult:
    """Budgeted global search over the bounded box; see the module docstring.

    ``cost`` maps a physical parameter vector to a scalar.  The returned
    best value is the running mean at the best-averaged center.  The
    per-iteration entries carry the running predicted minimum and a
    standard-error band (a visualization aid derived from repeated
    evaluations at the incumbent, not part of the search logic).
    """
    lo = config.bounds[:, 0]
    span = config.bounds[:, 1] - config.bounds[:, 0]
    dim = config.dim
    max_evals = config.max_evals
    records = []
    iterations = []
    state = {"evals": 0}

    def evaluate(center, iteration):
        theta = lo + np.asarray(center) * span
        value = float(cost(theta))
        state["evals"] += 1
        records.append(
            {
                "iteration": iteration,
                "eval_index": state["evals"] - 1,
                "theta": theta.tolist(),
                "value": value,
                "runs_cumulative": state["evals"] * config.shots_per_evaluation,
                "phase": "direct",
            }
        )
        return value

    def evals_left():
        return max_evals - state["evals"]

    direct_budget = max_evals
    if config.noisy and config.polish_fraction > 0.0:
        direct_budget = max(int(np.ceil(max_evals * (1.0 - config.polish_fraction))), 1)

    center0 = tuple([0.5] * dim)
    rects = [_Rect(center0, tuple([0] * dim), evaluate(center0, 0))]
    iteration = 0
    while state["evals"] < direct_budget:
        iteration += 1
        incumbent = min(rects, key=lambda r: r.mean)
        if config.noisy and state["evals"] < direct_budget:
            incumbent.add_sample(evaluate(incumbent.center, iteration))
            incumbent = min(rects, key=lambda r: r.mean)
        band = incumbent.stderr()
        if band is None:
            band = abs(incumbent.mean) * np.sqrt(2.0 / config.shots_per_evaluation)
        iterations.append(
            {
                "iteration": iteration,
                "predicted_min": incumbent.mean,
                "predicted_band": band,
                "runs_cumulative": state["evals"] * config.shots_per_evaluation,
            }
        )
        progressed = False
        for rect in _potentially_optimal(rects, config.eps_dir):
            if direct_budget - state["evals"] < 2:
                break
            levels = np.asarray(rect.levels)
            if levels.min() >= config.max_subdivisions:
                continue
            split_dim = int(np.argmin(levels))
            offset = 3.0 ** (-(levels[split_dim] + 1.0))
            child_levels = levels.copy()
            child_levels[split_dim] += 1
            child_levels = tuple(child_levels)
            for sign in (+1.0, -1.0):
                c = np.asarray(rect.center).copy()
                c[split_dim] += sign * offset
                c = tuple(c)
                rects.append(_Rect(c, child_levels, evaluate(c, iteration)))
            rect.levels = child_levels
            progressed = True
        if not progressed:
            break

    best = min(rects, key=lambda r: r.mean)
    best_theta = lo + np.asarray(best.center) * span
    polish_info = None

    if config.noisy and config.polish_fraction > 0.0 and evals_left() > dim + 2:
        reserve = min(max(5, evals_left() // 10), 25, evals_left() - 1)
        nm_budget = evals_left() - reserve
        u0 = np.asarray(best.center)

        def unit_cost(u):
            theta = lo + np.clip(u, 0.0, 1.0) * span
            value = float(cost(theta))
            state["evals"] += 1
            records.append(
                {
                    "iteration": -1,
                    "eval_index": state["evals"] - 1,
                    "theta": theta.tolist(),
                    "value": value,
                    "runs_cumulative": state["evals"] * config.shots_per_evaluation,
                    "phase": "polish",
                }
            )
            return value

        simplex = _initial_simplex(u0, config.nm_initial_scale)
        res = minimize(
            unit_cost,
            u0,
            method="Nelder-Mead",
            bounds=[(0.0, 1.0)] * dim,
            options={
                "maxfev": nm_budget,
                "xatol": 1e-12,
                "fatol": 1e-12,
                "initial_simplex": simplex,
            },
        )
        candidate = np.clip(res.x, 0.0, 1.0)
        samples = [unit_cost(candidate) for _ in range(min(reserve, evals_left()))]
        cand_mean = float(np.mean(samples)) if samples else float(res.fun)
        if cand_mean < best.mean:
            best_theta = lo + candidate * span
            best_value = cand_mean
        else:
            best_value = best.mean
        polish_info = {
            "candidate_theta": (lo + candidate * span).tolist(),
            "candidate_mean": cand_mean,
            "accepted": bool(cand_mean < best.mean),
        }
    else:
        best_value = best.mean

    return DirectResult(
        best_theta=best_theta,
        best_value=float(best_value),
        n_evals=state["evals"],
        runs_used=state["evals"] * config.shots_per_evaluation,
        records=records,
        iterations=iterations,
        rectangles=[(r.center, r.levels) for r in rects],
        polish=polish_info,
    )


def _initial_simplex(u0, scale):
    dim = len(u0)
    simplex = np.tile(u0, (dim + 1, 1))
    for i in range(dim):
        step = scale if u0[i] + scale <= 1.0 else -scale
        simplex[i + 1, i] = np.clip(u0[i] + step, 0.0, 1.0)
        if simplex[i + 1, i] == simplex[0, i]:
            simplex[i + 1, i] = np.clip(u0[i] - scale, 0.0, 1.0)
    return simplex


@dataclass
class RefineResult:
    theta: np.ndarray
    value: float
    n_evals: int
    converged: bool
    message: str


def local_refine(cost, theta0, config: OptimizerConfig, max_evals: int = None) -> RefineResult:
    """Bounded Nelder-Mead descent from theta0 (clipped into the box).

    Terminates when the simplex has shrunk below ``config.nm_tol`` in unit
    coordinates or the evaluation budget is exhausted, in which case the
    best point so far is returned with ``converged=False``.
    """
    lo = config.bounds[:, 0]
    span = config.bounds[:, 1] - config.bounds[:, 0]
    u0 = np.clip((np.asarray(theta0, dtype=float) - lo) / span, 0.0, 1.0)
    if max_evals is None:
        max_evals = config.max_evals

    def unit_cost(u):
        return float(cost(lo + np.clip(u, 0.0, 1.0) * span))

    res = minimize(
        unit_cost,
        u0,
        method="Nelder-Mead",
        bounds=[(0.0, 1.0)] * config.dim,
        options={
            "maxfev": max_evals,
            "xatol": config.nm_tol,
            "fatol": 1e-14,
            "initial_simplex": _initial_simplex(u0, config.nm_initial_scale),
        },
    )
    return RefineResult(
        theta=lo + np.clip(res.x, 0.0, 1.0) * span,
        value=float(res.fun),
        n_evals=int(res.nfev),
        converged=bool(res.success),
        message=str(res.message),
    )


@dataclass
class MinimizeResult:
    theta: np.ndarray
    value: float
    n_evals: int
    n_starts: int


def minimize_cost(
    cost,
    bounds,
    restarts: int = 4,
    seed: int = 0,
    direct_evals: int = None,
    nm_evals: int = None,
    warm_starts=(),
    nm_tol: float = 1e-8,
) -> MinimizeResult:
    """Noiseless minimization: coarse global pass plus multi-start refinement.

    Starts are the global best, well-separated runner-up centers, uniform
    random points to fill up to ``restarts``, and any supplied warm
    starts.  Warm starts are refined as given, which guarantees the result
    never exceeds their initial value.
    """
    bounds = np.asarray(bounds, dtype=float)
    dim = bounds.shape[0]
    if direct_evals is None:
        direct_evals = 150 * dim
    if nm_evals is None:
        nm_evals = 200 * dim
    cfg = OptimizerConfig(
        bounds=bounds,
        total_run_budget=direct_evals,
        shots_per_evaluation=1,
        noisy=False,
        nm_tol=nm_tol,
        seed=seed,
    )
    dres = direct_search(cost, cfg)
    n_evals = dres.n_evals

    starts = [np.asarray(dres.best_theta)]
    lo, span = bounds[:, 0], bounds[:, 1] - bounds[:, 0]
    by_value = sorted(dres.records, key=lambda r: r["value"])
    for rec in by_value:
        if len(starts) >= max(restarts // 2, 1):
            break
        cand = np.asarray(rec["theta"])
        units = (cand - lo) / span
        if all(np.linalg.norm(units - (np.asarray(s) - lo) / span) > 0.15 for s in starts):
            starts.append(cand)
    rng = np.random.default_rng(seed)
    while len(starts) < restarts:
        starts.append(lo + rng.random(dim) * span)
    starts.extend(np.asarray(w, dtype=float) for w in warm_starts)

    best_theta, best_value = np.asarray(dres.best_theta), dres.best_value
    for s in starts:
        ref = local_refine(cost, s, cfg, max_evals=nm_evals)
        n_evals += ref.n_evals
        if ref.value < best_value:
            best_theta, best_value = ref.theta, ref.value
    return MinimizeResult(
        theta=best_theta, value=float(best_value), n_evals=n_evals, n_starts=len(starts)
    )


@dataclass
class OptimizationTrace:
    """Everything a simulated closed-loop run measured, plus the outcome."""

    records: list
    iterations: list
    best_theta: np.ndarray
    best_value: float
    best_xi2_hat: float
    runs_used: int
    seed: int
    config: dict

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec) + "\n")

    def summary_dict(self) -> dict:
        return {
            "best_theta": np.asarray(self.best_theta).tolist(),
            "best_value": self.best_value,
            "best_xi2_hat": self.best_xi2_hat,
            "runs_used": self.runs_used,
            "n_evaluations": len(self.records),
            "seed": self.seed,
            "config": self.config,
        }


def feedback_loop(
    geometry: Geometry,
    V: InteractionMatrix,
    n_layers: int,
    config: OptimizerConfig,
    penalty: bool = True,
    x_bar: float = None,
) -> OptimizationTrace:
    """Closed-loop optimization against a simulated shot-noise experiment.

    Each cost evaluation prepares all spins down, applies the coherent
    state preparation pulse and the trial circuit, measures half the shots
    in the x basis and half in y, and assembles the penalized squeezing
    estimate.  RNG streams are derived from the seed by evaluation index,
    so traces are reproducible regardless of evaluation order.
    """
    n_atoms = geometry.n_atoms
    if V.n_atoms != n_atoms:
        raise InvalidArgumentError("interaction matrix does not match geometry")
    estimates = {}
    counter = {"i": 0}

    def cost(theta):
        idx = counter["i"]
        counter["i"] += 1
        ss = np.random.SeedSequence(entropy=config.seed, spawn_key=(idx,))
        ss_x, ss_y = ss.spawn(2)
        state = statevec.init_down_z(n_atoms)
        statevec.apply_rotation(state, "y", -np.pi / 2.0)
        statevec.apply_circuit(state, V, theta)
        n_x = config.shots_per_evaluation // 2
        n_y = config.shots_per_evaluation - n_x
        xb = measure.sample_shots(state, "x", n_x, ss_x)
        yb = measure.sample_shots(state, "y", n_y, ss_y)
        est = measure.estimate_cost(xb, yb, penalty=penalty, x_bar=x_bar)
        estimates.setdefault(tuple(np.asarray(theta)), []).append(est)
        return est.cost

    dres = direct_search(cost, config)
    for rec in dres.records:
        ests = estimates.get(tuple(rec["theta"]))
        if ests:
            rec["xi2_hat"] = ests[0].xi2_hat if len(ests) == 1 else None
    # Per-center running means of the plain squeezing estimate.
    for rec in dres.records:
        ests = estimates[tuple(rec["theta"])]
        rec["xi2_hat"] = float(np.mean([e.xi2_hat for e in ests]))
        rec["penalty_value"] = float(np.mean([e.penalty_value for e in ests]))
    best_ests = estimates[tuple(np.asarray(dres.best_theta))]
    best_xi2_hat = float(np.mean([e.xi2_hat for e in best_ests]))
    return OptimizationTrace(
        records=dres.records,
        iterations=dres.iterations,
        best_theta=np.asarray(dres.best_theta),
        best_value=dres.best_value,
        best_xi2_hat=best_xi2_hat,
        runs_used=dres.runs_used,
        seed=config.seed,
        config={
            "total_run_budget": config.total_run_budget,
            "shots_per_evaluation": config.shots_per_evaluation,
            "eps_dir": config.eps_dir,
            "noisy": config.noisy,
            "polish_fraction": config.polish_fraction,
            "penalty": penalty,
            "n_layers": n_layers,
            "n_atoms": n_atoms,
        },
    )


@dataclass
class ExactResult:
    theta: ParamVector
    xi2: float
    n_evals: int


def exact_optimize(
    geometry: Geometry,
    V: InteractionMatrix,
    n_layers: int,
    restarts: int = 4,
    seed: int = 0,
    v0: float = 1.0,
    penalty: bool = False,
    x_bar: float = None,
    warm_start=None,
    direct_evals: int = None,
    nm_evals: int = None,
) -> ExactResult:
    """Noiseless minimization of the exact squeezing parameter.

    ``warm_start`` may be the optimal parameters of a shallower circuit;
    they are padded with identity layers, which makes the optimized value
    non-increasing in depth.  With ``penalty`` the contrast penalty is
    added to the search objective (the reported xi2 is always the plain
    exact value at the optimum).
    """
    n_atoms = geometry.n_atoms
    if V.n_atoms != n_atoms:
        raise InvalidArgumentError("interaction matrix does not match geometry")
    bounds = default_bounds(n_layers, v0)
    if x_bar is None:
        x_bar = measure.default_x_bar(n_atoms)

    def xi2_of(theta):
        state = statevec.init_coherent_x(n_atoms)
        statevec.apply_circuit(state, V, theta)
        e = statevec.collective_expectations(state)
        try:
            value = statevec.xi2_from_moments(n_atoms, e.bloch, e.cov)
        except DegenerateBlochVectorError:
            return measure.LARGE_COST, 0.0
        return value, abs(e.jx)

    def cost(theta):
        value, jx = xi2_of(theta)
        if penalty:
            value += measure.penalty_fp(jx, x_bar)
        return value

    warm = []
    if warm_start is not None:
        prev = np.asarray(getattr(warm_start, "values", warm_start), dtype=float)
        if len(prev) % 3 != 0 or len(prev) > 3 * n_layers:
            raise InvalidArgumentError("warm start longer than the requested circuit")
        warm.append(np.concatenate([prev, np.zeros(3 * n_layers - len(prev))]))

    res = minimize_cost(
        cost,
        bounds,
        restarts=restarts,
        seed=seed,
        direct_evals=direct_evals,
        nm_evals=nm_evals,
        warm_starts=warm,
    )
    xi2_star, _ = xi2_of(res.theta)
    return ExactResult(
        theta=ParamVector(res.theta, bounds), xi2=float(xi2_star), n_evals=res.n_evals
    )


def foat_optimal_xi2(V: InteractionMatrix, n_atoms: int, tau_max: float = 10.0) -> dict:
    """Best squeezing from a single finite-range zz gate on this lattice.

    Scans the gate duration and refines the minimum; the infinite-range
    analogue is ``dicke.oat_optimal_xi2``.  Returns {"tau": ..., "xi2": ...}.
    """
    from scipy.optimize import minimize_scalar

    def value(tau):
        state = statevec.init_coherent_x(n_atoms)
        statevec.apply_dz(state, V, tau)
        try:
            return statevec.xi2_exact(state)
        except DegenerateBlochVectorError:
            return measure.LARGE_COST

    taus = np.linspace(0.0, tau_max, 201)[1:]
    values = [value(t) for t in taus]
    i = int(np.argmin(values))
    lo = taus[max(i - 1, 0)]
    hi = taus[min(i + 1, len(taus) - 1)]
    res = minimize_scalar(
        value, bracket=(lo, taus[i], hi), method="golden", options={"xtol": 1e-9}
    )
    return {"tau": float(res.x), "xi2": float(res.fun)}
