"""Fidelities, excitation readouts, decay estimate and target states."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.integrate import cumulative_trapezoid

from rydopt.basis import ManyBodyBasis, QuantumState, fock_state
from rydopt.errors import AmbiguityError, ConfigError, UsageError
from rydopt.hamiltonian import HamiltonianTerms

_DEGENERACY_TOL = 1e-9


def _amps(state, basis: ManyBodyBasis | None = None) -> np.ndarray:
    if isinstance(state, QuantumState):
        if basis is not None and state.basis is not basis:
            raise UsageError("states live on different bases")
        return state.amplitudes
    return np.asarray(state, dtype=complex)


def fidelity(psi, target) -> float:
    """``|<target|psi>|^2``."""
    basis = psi.basis if isinstance(psi, QuantumState) else None
    if isinstance(target, QuantumState) and basis is not None and target.basis is not basis:
        raise UsageError("fidelity between states on different bases")
    a, b = _amps(psi), _amps(target)
    if a.shape != b.shape:
        raise UsageError("fidelity between vectors of different length")
    return float(abs(np.vdot(b, a)) ** 2)


def excitation_density(psi: QuantumState) -> np.ndarray:
    """Per-unit Rydberg population n_e(x)."""
    return psi.populations() @ psi.basis.bits()


def excitation_distribution(psi: QuantumState) -> np.ndarray:
    """P_n for n = 0..n_units, summed over the contiguous sectors."""
    pop = psi.populations()
    starts = psi.basis.sector_start
    return np.array([pop[starts[n] : starts[n + 1]].sum() for n in range(psi.basis.n_units + 1)])


def mean_excitation(psi: QuantumState) -> float:
    return float(psi.populations() @ psi.basis.n_exc)


def decay_probability(times: np.ndarray, n_exc: np.ndarray, gamma: float) -> np.ndarray:
    """Cumulative ``P_d(t) = gamma * int_0^t N_e dt'`` (trapezoidal)."""
    return gamma * cumulative_trapezoid(np.asarray(n_exc, dtype=float), np.asarray(times, dtype=float), initial=0.0)


def live_mask(terms: HamiltonianTerms) -> int:
    """Bitmask of all units that hold at least one atom."""
    return int(sum(1 << i for i, ok in enumerate(terms.chain.alive) if ok))


@dataclass(frozen=True)
class TargetState:
    """Target specification, resolved per lattice realization.

    kind is one of ``crystal``, ``ghz``, ``symmetric`` or ``explicit``.
    ``n_excitations`` (crystal) picks the lowest-interaction configuration in
    that sector; without it the classical ground state at the final detuning is
    used. ``coefficients`` (symmetric) are the amplitudes a_n of the symmetric
    Dicke states |s_n>; ``state`` (explicit) maps bitmasks to amplitudes.
    """

    kind: str
    n_excitations: int | None = None
    theta: float = 0.0
    coefficients: tuple[float, ...] = ()
    state: tuple[tuple[int, complex], ...] = ()

    def __post_init__(self):
        if self.kind not in {"crystal", "ghz", "symmetric", "explicit"}:
            raise ConfigError(f"unknown target kind {self.kind!r}")
        if self.kind == "symmetric":
            c = np.asarray(self.coefficients, dtype=float)
            norm = np.linalg.norm(c)
            if norm == 0:
                raise ConfigError("symmetric target needs nonzero coefficients")
            if abs(norm - 1) > 1e-12:
                warnings.warn(f"symmetric coefficients had norm {norm:.6g}; normalizing", stacklevel=2)
                object.__setattr__(self, "coefficients", tuple((c / norm).tolist()))


def crystal_config(terms: HamiltonianTerms, final_delta: float | None = None, n_excitations: int | None = None) -> int:
    """Classical (Omega -> 0) ground configuration over the live units."""
    live = live_mask(terms)
    basis = terms.basis
    ok = (basis.configs & ~live) == 0
    if n_excitations is not None:
        ok &= basis.n_exc == n_excitations
        energies = terms.diag_interaction
    else:
        if final_delta is None:
            raise UsageError("crystal target needs n_excitations or a final detuning")
        energies = terms.diagonal(final_delta)
    if not np.any(ok):
        raise AmbiguityError(f"no configuration with {n_excitations} excitations in the basis")
    e = energies[ok]
    configs = basis.configs[ok]
    order = np.argsort(e, kind="stable")
    if len(e) > 1 and e[order[1]] - e[order[0]] <= _DEGENERACY_TOL * max(1.0, abs(e[order[0]])):
        raise AmbiguityError(
            f"classical ground state is degenerate ({configs[order[0]]:#b} vs {configs[order[1]]:#b}); "
            "shift the detuning off the crossing"
        )
    return int(configs[order[0]])


def ghz_state(basis: ManyBodyBasis, theta: float, live: int | None = None) -> QuantumState:
    full = (1 << basis.n_units) - 1 if live is None else live
    amps = np.zeros(basis.dim, dtype=complex)
    amps[basis.index_of[0]] = 1 / math.sqrt(2)
    amps[basis.index_of[full]] = np.exp(1j * theta) / math.sqrt(2)
    return QuantumState(basis, amps)


def symmetric_state(basis: ManyBodyBasis, coefficients, live: int | None = None) -> QuantumState:
    """``sum_n a_n |s_n>`` over the live units; unreachable a_n are dropped."""
    units = [i for i in range(basis.n_units) if live is None or (live >> i) & 1]
    coeffs = np.asarray(coefficients, dtype=complex)
    amps = np.zeros(basis.dim, dtype=complex)
    for n, a in enumerate(coeffs):
        if n > len(units) or a == 0:
            continue
        members = [sum(1 << u for u in combo) for combo in combinations(units, n)]
        idx = basis.lookup(members)
        if np.any(idx < 0):
            raise UsageError(f"basis truncation removes part of |s_{n}>")
        amps[idx] = a / math.sqrt(len(members))
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise UsageError("symmetric target has no support on this realization")
    return QuantumState(basis, amps / norm)


def resolve_target(target: TargetState, terms: HamiltonianTerms, final_delta: float | None = None) -> QuantumState:
    basis = terms.basis
    live = live_mask(terms)
    if target.kind == "crystal":
        return fock_state(basis, crystal_config(terms, final_delta, target.n_excitations))
    if target.kind == "ghz":
        return ghz_state(basis, target.theta, live)
    if target.kind == "symmetric":
        return symmetric_state(basis, target.coefficients, live)
    amps = np.zeros(basis.dim, dtype=complex)
    for mask, a in target.state:
        idx = basis.index_of.get(int(mask))
        if idx is None:
            raise UsageError(f"explicit target config {mask:#b} not in basis")
        amps[idx] = a
    return QuantumState(basis, amps / np.linalg.norm(amps))


def measure_configs(psi, n_shots: int, seed) -> dict[int, int]:
    """Projective excitation measurements: bitmask -> count."""
    if n_shots < 1:
        raise UsageError("n_shots must be at least 1")
    p = psi.populations()
    counts = np.random.default_rng(seed).multinomial(n_shots, p / p.sum())
    return {int(c): int(k) for c, k in zip(psi.basis.configs, counts) if k}


def measure_ensemble(states: list[QuantumState], n_shots: int, seed) -> dict[int, int]:
    """Shots drawn from the uniform mixture of ``states`` (one per realization)."""
    rng = np.random.default_rng(seed)
    which = rng.multinomial(n_shots, np.full(len(states), 1 / len(states)))
    hist: dict[int, int] = {}
    for psi, n in zip(states, which):
        if n == 0:
            continue
        p = psi.populations()
        for c, k in zip(psi.basis.configs, rng.multinomial(n, p / p.sum())):
            if k:
                hist[int(c)] = hist.get(int(c), 0) + int(k)
    return dict(sorted(hist.items()))


def ensemble_density_matrix(states: list[QuantumState], weights=None, n_units: int | None = None) -> np.ndarray:
    """Mixture density matrix in the full ``2**n_units`` bitmask basis."""
    n_units = n_units or states[0].basis.n_units
    weights = np.full(len(states), 1 / len(states)) if weights is None else np.asarray(weights, dtype=float)
    rho = np.zeros((2**n_units, 2**n_units), dtype=complex)
    for w, psi in zip(weights, states):
        full = np.zeros(2**n_units, dtype=complex)
        full[psi.basis.configs] = psi.amplitudes
        rho += w * np.outer(full, full.conj())
    return rho

