"""dCRAB optimal control over an ensemble of defective lattices.

Each super-iteration draws a fresh random Fourier basis for both fields,
optimizes its coefficients with Nelder-Mead starting from zero (which
reproduces the incumbent pulse exactly), and freezes the improvement into the
pulse before the next draw.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from rydopt.basis import QuantumState, Truncation, build_basis, ground_config
from rydopt.errors import ConfigError, NumericalError
from rydopt.hamiltonian import assemble
from rydopt.lattice import (
    DEFAULT_BLOCKADE_BOUND,
    LatticeGeometry,
    reduce_to_superatoms,
    sample_ensemble,
)
from rydopt.model import PhysicalModel
from rydopt.observables import TargetState, resolve_target
from rydopt.propagator import final_state
from rydopt.pulse import (
    ControlConstraints,
    FourierSeries,
    PulseParams,
    SampledPulse,
    draw_basis,
    synthesize,
)

log = logging.getLogger(__name__)


@dataclass
class SimplexResult:
    x: np.ndarray
    f: float
    trace: list[float]
    n_evals: int
    reason: str


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    x0,
    step,
    budget: int = 1000,
    tol: float = 1e-12,
    xtol: float | None = None,
    alpha: float = 1.0,
    gamma: float = 2.0,
    rho: float = 0.5,
    sigma: float = 0.5,
) -> SimplexResult:
    """Minimize ``objective`` with the reflect/expand/contract/shrink simplex.

    Stops when the budget of function evaluations is spent, when the spread of
    simplex values drops to ``tol``, or when the simplex diameter (max-norm
    distance to the best vertex) drops to ``xtol`` (default ``tol``).
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    if n < 1:
        raise ConfigError("simplex dimension must be at least 1")
    step = np.broadcast_to(np.asarray(step, dtype=float), (n,))
    xtol = tol if xtol is None else xtol
    trace: list[float] = []

    class _Budget(Exception):
        pass

    def ev(x):
        if len(trace) >= budget:
            raise _Budget
        v = float(objective(x))
        trace.append(v)
        return v

    sim = np.vstack([x0] + [x0 + step[i] * np.eye(n)[i] for i in range(n)])
    vals = np.full(n + 1, np.inf)
    reason = "budget"
    try:
        for i in range(n + 1):
            vals[i] = ev(sim[i])
        while True:
            order = np.argsort(vals, kind="stable")
            sim, vals = sim[order], vals[order]
            if vals[-1] - vals[0] <= tol:
                reason = "spread"
                break
            if np.max(np.abs(sim[1:] - sim[0])) <= xtol:
                reason = "diameter"
                break
            if len(trace) >= budget:
                break
            centroid = sim[:-1].mean(axis=0)
            worst = sim[-1]
            xr = centroid + alpha * (centroid - worst)
            fr = ev(xr)
            if fr < vals[0]:
                xe = centroid + gamma * (xr - centroid)
                fe = ev(xe)
                sim[-1], vals[-1] = (xe, fe) if fe < fr else (xr, fr)
                continue
            if fr < vals[-2]:
                sim[-1], vals[-1] = xr, fr
                continue
            if fr < vals[-1]:
                xc = centroid + rho * (xr - centroid)
                fc = ev(xc)
                if fc <= fr:
                    sim[-1], vals[-1] = xc, fc
                    continue
            else:
                xc = centroid + rho * (worst - centroid)
                fc = ev(xc)
                if fc < vals[-1]:
                    sim[-1], vals[-1] = xc, fc
                    continue
            for i in range(1, n + 1):
                sim[i] = sim[0] + sigma * (sim[i] - sim[0])
                vals[i] = np.inf
                vals[i] = ev(sim[i])
    except _Budget:
        pass
    k = int(np.argmin(vals))
    return SimplexResult(sim[k].copy(), float(vals[k]), trace, len(trace), reason)


@dataclass
class OptimizationProblem:
    """Everything that defines an optimization; seeds make it reproducible."""

    geometry: LatticeGeometry
    model: PhysicalModel
    target: TargetState
    guess: PulseParams
    constraints: ControlConstraints = field(default_factory=ControlConstraints)
    filling: float = 1.0
    n_realizations: int = 1
    ensemble_seed: int = 0
    truncation: Truncation = field(default_factory=Truncation)
    budget: int = 1000
    n_super_iterations: int = 5
    n_freqs: int = 3
    seed: int = 0
    dt: float = 1e-3
    tol: float = 1e-10
    final_delta: float | None = None
    blockade_bound: float = DEFAULT_BLOCKADE_BOUND

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ConfigError("n_realizations must be at least 1")
        if self.budget < 0 or self.n_super_iterations < 0:
            raise ConfigError("budget and n_super_iterations must be non-negative")
        dim = 4 * self.n_freqs
        # a zero budget means "evaluate the guess only"
        if self.n_super_iterations > 0 and 0 < self.budget < dim + 1:
            raise ConfigError(f"budget {self.budget} is below the simplex size {dim + 1}")

    @property
    def duration(self) -> float:
        return self.guess.duration

    def realizations(self, seed: int | None = None):
        seed = self.ensemble_seed if seed is None else seed
        return sample_ensemble(self.geometry, self.filling, self.n_realizations, seed)


@dataclass
class _Member:
    terms: object
    psi0: object
    target: np.ndarray
    weight: float


class EnsembleObjective:
    """Mean fidelity over a frozen set of realizations.

    Identical realizations (e.g. all perfect) are simulated once and weighted.
    Results are reduced in realization order, so the value does not depend on
    the worker count.
    """

    def __init__(self, problem: OptimizationProblem, realizations=None, workers: int = 1):
        self.problem = problem
        self.workers = max(1, int(workers))
        realizations = problem.realizations() if realizations is None else realizations
        self.realizations = realizations
        keys = [r.occupied.tobytes() for r in realizations]
        self._slot = []
        uniq: dict[bytes, int] = {}
        self.members: list[_Member] = []
        for key, real in zip(keys, realizations):
            if key not in uniq:
                uniq[key] = len(self.members)
                chain = reduce_to_superatoms(real, problem.model, problem.blockade_bound)
                basis = build_basis(chain, problem.truncation, drop_dead=True)
                terms = assemble(chain, basis, problem.model)
                target = resolve_target(problem.target, terms, problem.final_delta)
                self.members.append(_Member(terms, ground_config(basis), target.amplitudes, 0.0))
            self._slot.append(uniq[key])

    def realization_terms(self) -> list:
        """Hamiltonian terms per realization (shared between duplicates)."""
        return [self.members[s].terms for s in self._slot]

    def _one(self, member: _Member, pulse: SampledPulse) -> tuple[float, np.ndarray | None]:
        try:
            psi = final_state(member.psi0, member.terms, pulse)
        except NumericalError as exc:
            log.warning("propagation failed: %s", exc)
            return 0.0, None
        return float(abs(np.vdot(member.target, psi)) ** 2), psi

    def evaluate(self, pulse: SampledPulse, keep_states: bool = False):
        """Per-realization fidelities (and final states when requested)."""
        if self.workers > 1 and len(self.members) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                results = list(pool.map(lambda m: self._one(m, pulse), self.members))
        else:
            results = [self._one(m, pulse) for m in self.members]
        fids = np.array([results[s][0] for s in self._slot])
        if keep_states:
            states = []
            for s in self._slot:
                psi = results[s][1]
                states.append(None if psi is None else QuantumState.unchecked(self.members[s].terms.basis, psi))
            return fids, states
        return fids

    def infidelity(self, pulse: SampledPulse) -> float:
        return float(1.0 - np.mean(self.evaluate(pulse)))


@dataclass
class OptimizationRun:
    best_params: PulseParams
    best_pulse: SampledPulse
    best_fom: float
    guess_fom: float
    trace: list[dict]
    super_iterations: list[dict]
    realization_fidelities: np.ndarray
    wall_time: float

    @property
    def fidelity(self) -> float:
        return 1.0 - self.best_fom

    def incumbent_history(self) -> list[float]:
        return [self.guess_fom] + [s["end_fom"] for s in self.super_iterations]


def _with_coefficients(params: PulseParams, f_omega, f_delta, x) -> PulseParams:
    n_o, n_d = len(f_omega), len(f_delta)
    om = FourierSeries.from_vector(f_omega, x[: 2 * n_o])
    de = FourierSeries.from_vector(f_delta, x[2 * n_o : 2 * n_o + 2 * n_d])
    return replace(params, omega=params.omega.with_component(om), delta=params.delta.with_component(de))


def dcrab_optimize(
    problem: OptimizationProblem,
    workers: int = 1,
    on_eval: Callable[[dict], None] | None = None,
    objective: EnsembleObjective | None = None,
) -> OptimizationRun:
    t_start = time.perf_counter()
    objective = objective or EnsembleObjective(problem, workers=workers)
    cons = problem.constraints
    trace: list[dict] = []

    def record(super_it, fom, error=None):
        rec = {"eval": len(trace), "super_iteration": super_it, "fom": fom, "time": time.perf_counter() - t_start}
        if error:
            rec["error"] = error
        trace.append(rec)
        if on_eval is not None:
            on_eval(rec)

    def fom_of(params: PulseParams) -> float:
        pulse = synthesize(params, cons, problem.dt)
        return objective.infidelity(pulse)

    params = problem.guess
    best = fom_of(params)
    guess_fom = best
    record(-1, best)
    summaries = []
    n = problem.n_freqs
    step = np.concatenate([np.full(2 * n, 0.1 * cons.omega_max), np.full(2 * n, 0.1 * cons.delta_max)])
    n_super = problem.n_super_iterations if problem.budget > 0 else 0
    for s in range(n_super):
        seq = np.random.SeedSequence([problem.seed, s])
        seed_o, seed_d = (int(c.generate_state(1)[0]) for c in seq.spawn(2))
        f_omega = draw_basis(seed_o, n, cons.omega_bandwidth, problem.duration)
        f_delta = draw_basis(seed_d, n, cons.delta_bandwidth, problem.duration)
        cache: dict[bytes, float] = {}
        base = params

        def objective_fn(x, s=s, base=base):
            key = np.asarray(x, dtype=float).tobytes()
            if key in cache:
                return cache[key]
            try:
                val = fom_of(_with_coefficients(base, f_omega, f_delta, x))
                record(s, val)
            except NumericalError as exc:
                val = 1.0
                record(s, val, str(exc))
            cache[key] = val
            return val

        start = best
        res = nelder_mead(objective_fn, np.zeros(4 * n), step, problem.budget, problem.tol)
        if res.f < best:
            params = _with_coefficients(base, f_omega, f_delta, res.x)
            best = res.f
        summaries.append(
            {
                "super_iteration": s,
                "basis_seeds": [seed_o, seed_d],
                "omega_freqs_mhz": list(f_omega),
                "delta_freqs_mhz": list(f_delta),
                "start_fom": start,
                "end_fom": best,
                "n_evals": res.n_evals,
                "stop_reason": res.reason,
            }
        )
        log.info("super-iteration %d: FoM %.6g -> %.6g (%d evals)", s, start, best, res.n_evals)
    best_pulse = synthesize(params, cons, problem.dt)
    fids = objective.evaluate(best_pulse)
    return OptimizationRun(
        best_params=params,
        best_pulse=best_pulse,
        best_fom=best,
        guess_fom=guess_fom,
        trace=trace,
        super_iterations=summaries,
        realization_fidelities=fids,
        wall_time=time.perf_counter() - t_start,
    )


class JsonlTraceWriter:
    """``on_eval`` callback appending one JSON record per evaluation."""

    def __init__(self, path):
        self._fh = open(path, "w")

    def __call__(self, rec: dict) -> None:
        self._fh.write(json.dumps(rec) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()
