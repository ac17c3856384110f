"""Two-step GHZ verification: subspace check, then free evolution under H_d.

The prepared state is assumed to live on span{|G>, |E>} as

    rho_sub = 1/2 |G><G| + 1/2 |E><E| + g e^{ia} |E><G| + g e^{-ia} |G><E|,

with coherence ``g = gamma`` in [0, 1/2] and phase ``a = alpha``. With this
convention the GHZ state (|G> + e^{i theta}|E>)/sqrt(2) is exactly
(gamma, alpha) = (1/2, theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rydopt.basis import QuantumState
from rydopt.errors import DomainError, UsageError
from rydopt.hamiltonian import DrivenHamiltonian, HamiltonianTerms
from rydopt.observables import live_mask
from rydopt.propagator import DENSE_MAX_DIM, evolve
from rydopt.pulse import SampledPulse


@dataclass(frozen=True)
class SubspaceState:
    gamma: float
    alpha: float

    def __post_init__(self):
        if self.gamma < 0 or self.gamma > 0.5 + 1e-12:
            raise DomainError(f"coherence gamma = {self.gamma} violates positivity (0 <= gamma <= 1/2)")

    def matrix(self) -> np.ndarray:
        """2x2 density matrix in the ordered basis (|G>, |E>)."""
        c = self.gamma * np.exp(1j * self.alpha)
        return np.array([[0.5, np.conj(c)], [c, 0.5]])


@dataclass
class DetectionResult:
    times: np.ndarray
    excitation: np.ndarray
    reference: np.ndarray
    deviation: np.ndarray
    max_deviation: float
    argmax_time: float
    unit: int


def extract_subspace(states, weights=None, live_masks=None) -> tuple[SubspaceState, float]:
    """Project a pure-state ensemble onto span{|G>, |E>}.

    Returns the renormalized ``(gamma, alpha)`` and the leakage
    ``1 - <G|rho|G> - <E|rho|E>``.
    """
    if isinstance(states, QuantumState):
        states = [states]
    n = len(states)
    weights = np.full(n, 1 / n) if weights is None else np.asarray(weights, dtype=float)
    if live_masks is None:
        live_masks = [(1 << s.basis.n_units) - 1 for s in states]
    p_g = p_e = 0.0
    coh = 0j
    for w, psi, live in zip(weights, states, live_masks):
        ig = psi.basis.index_of[0]
        ie = psi.basis.index_of.get(int(live))
        a_g = psi.amplitudes[ig]
        a_e = psi.amplitudes[ie] if ie is not None else 0j
        p_g += w * abs(a_g) ** 2
        p_e += w * abs(a_e) ** 2
        coh += w * a_e * np.conj(a_g)  # <E|rho|G>
    trace = p_g + p_e
    if trace < 0.5:
        raise DomainError(f"state is not in the GHZ subspace (subspace weight {trace:.3g})")
    gamma = min(abs(coh) / trace, 0.5)
    alpha = float(np.angle(coh)) % (2 * math.pi) if gamma > 0 else 0.0
    return SubspaceState(float(gamma), alpha), float(1.0 - trace)


def _free_evolution(terms: HamiltonianTerms, omega_m: float, vecs: np.ndarray, times: np.ndarray) -> np.ndarray:
    """States ``exp(-i H_d t) v`` for every column ``v`` and every time: (t, dim, n)."""
    h = DrivenHamiltonian(terms, omega_m, 0.0)
    if terms.dim <= DENSE_MAX_DIM:
        w, v = np.linalg.eigh(h.dense())
        coeff = v.T @ vecs
        return np.einsum("ij,tj,jn->tin", v, np.exp(-1j * np.outer(times, w)), coeff)
    dt = float(times[1] - times[0])
    pulse = SampledPulse(times, np.full(len(times), omega_m), np.zeros(len(times)))
    out = []
    for col in vecs.T:
        psi0 = QuantumState.unchecked(terms.basis, col)
        out.append(evolve(psi0, terms, pulse, record_interval=dt, store_states=True).states)
    return np.stack(out, axis=-1)


def _detection_overlaps(terms, omega_m, t_max, dt, unit):
    basis = terms.basis
    live = live_mask(terms)
    if not (live >> unit) & 1:
        raise UsageError(f"unit {unit} is empty")
    n = int(round(t_max / dt))
    times = np.linspace(0.0, t_max, n + 1)
    vecs = np.zeros((basis.dim, 2), dtype=complex)
    vecs[basis.index_of[0], 0] = 1.0
    vecs[basis.index_of[live], 1] = 1.0
    states = _free_evolution(terms, omega_m, vecs, times)
    proj = ((basis.configs >> unit) & 1).astype(float)
    g_t, e_t = states[:, :, 0], states[:, :, 1]
    a = (np.abs(g_t) ** 2) @ proj
    b = (np.abs(e_t) ** 2) @ proj
    c = (g_t.conj() * e_t) @ proj  # <G_t|P_i|E_t>
    return times, a, b, c


def _excitation(a, b, c, gamma, alpha):
    return 0.5 * (a + b) + 2.0 * gamma * np.real(np.exp(1j * alpha) * c)


def detection_evolution(
    sub: SubspaceState,
    terms: HamiltonianTerms,
    omega_m: float,
    t_max: float = 10.0,
    dt: float = 0.01,
    theta_target: float = math.pi / 2,
    unit: int = 0,
) -> DetectionResult:
    """Excitation trace E_i(t) of ``sub`` under H_d and its deviation from GHZ{theta_target}.

    The two pure states |G>, |E> are evolved separately and recombined; no
    density matrix is propagated.
    """
    if sub.gamma > 0.5 + 1e-12:
        raise DomainError("gamma > 1/2 is not a valid density matrix")
    times, a, b, c = _detection_overlaps(terms, omega_m, t_max, dt, unit)
    ex = _excitation(a, b, c, sub.gamma, sub.alpha)
    ref = _excitation(a, b, c, 0.5, theta_target)
    dev = ex - ref
    k = int(np.argmax(np.abs(dev)))
    return DetectionResult(times, ex, ref, dev, float(abs(dev[k])), float(times[k]), unit)


def deviation_map(
    terms: HamiltonianTerms,
    omega_m: float,
    theta_target: float,
    gammas,
    alphas,
    t_max: float = 10.0,
    dt: float = 0.01,
    unit: int = 0,
) -> np.ndarray:
    """|D| = max_t |D_t| on the (gamma, alpha) grid; shape (len(gammas), len(alphas))."""
    gammas = np.asarray(gammas, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    if len(gammas) < 2 or len(alphas) < 2:
        raise UsageError("deviation map needs at least two grid points per axis")
    if np.any(gammas < 0) or np.any(gammas > 0.5 + 1e-12):
        raise DomainError("gamma grid must lie in [0, 1/2]")
    _, a, b, c = _detection_overlaps(terms, omega_m, t_max, dt, unit)
    ref_coh = np.real(np.exp(1j * theta_target) * c)
    rot = np.real(np.exp(1j * alphas)[:, None] * c[None, :])  # (alpha, t)
    dev = 2.0 * gammas[:, None, None] * rot[None, :, :] - ref_coh[None, None, :]
    return np.max(np.abs(dev), axis=-1)
