"""Time-dependent Schroedinger propagation and instantaneous-spectrum diagnostics.

Controls are piecewise constant over each grid step (the mean of the two
bracketing samples). Each step is advanced with its exact exponential:

* small bases: batched dense diagonalization of the real symmetric step
  Hamiltonians, ``exp(-iH dt) = V exp(-i w dt) V^T``;
* large bases: short-iterative Lanczos with sub-stepping until the Krylov
  error estimate is below tolerance.

Both routes are unitary to rounding; the norm is checked, never reset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from rydopt.basis import QuantumState
from rydopt.errors import NumericalError, UsageError
from rydopt.hamiltonian import DrivenHamiltonian, HamiltonianTerms
from rydopt.pulse import SampledPulse

NORM_FAIL = 1e-6
DENSE_MAX_DIM = 400
_CHUNK_ELEMENTS = 2_000_000
_KRYLOV_DIM = 24
_KRYLOV_TOL = 1e-12


@dataclass
class Trajectory:
    """Record of one propagation.

    ``states`` is ``None`` unless snapshots were requested; ``n_exc`` and
    ``norms`` are always recorded at ``times``.
    """

    times: np.ndarray
    n_exc: np.ndarray
    norms: np.ndarray
    final: QuantumState
    states: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def _record_stride(pulse: SampledPulse, record_interval: float | None) -> int:
    if record_interval is None:
        return pulse.n_steps
    stride = int(round(record_interval / pulse.dt))
    if stride < 1 or abs(stride * pulse.dt - record_interval) > 1e-9 * record_interval:
        raise UsageError(f"record interval {record_interval} is not a multiple of dt {pulse.dt}")
    return stride


def _dense_steps(terms, omegas, deltas, dt, psi, on_step):
    d = terms.dim
    drive = 0.5 * terms.dense_drive()
    idx = np.arange(d)
    chunk = max(1, _CHUNK_ELEMENTS // (d * d))
    k0 = 0
    while k0 < len(omegas):
        om = omegas[k0 : k0 + chunk]
        de = deltas[k0 : k0 + chunk]
        h = om[:, None, None] * drive[None, :, :]
        h[:, idx, idx] += terms.diag_interaction[None, :] - de[:, None] * terms.n_exc[None, :]
        w, v = np.linalg.eigh(h)
        vt = np.ascontiguousarray(v.transpose(0, 2, 1))
        phase = np.exp(-1j * dt * w)
        for j in range(len(om)):
            psi = v[j] @ (phase[j] * (vt[j] @ psi))
            on_step(k0 + j + 1, psi)
        k0 += chunk
    return psi


def lanczos_expm(matvec, psi: np.ndarray, dt: float, norm_bound: float, m: int = _KRYLOV_DIM, tol: float = _KRYLOV_TOL):
    """``exp(-i H dt) psi`` by Lanczos with adaptive sub-steps."""
    t_done = 0.0
    h = min(dt, 2.0 * m / max(norm_bound, 1e-300) * 0.25) if norm_bound > 0 else dt
    h = min(h, dt)
    beta0 = np.linalg.norm(psi)
    while t_done < dt * (1 - 1e-14):
        h = min(h, dt - t_done)
        vs = np.zeros((m + 1, psi.size), dtype=complex)
        alpha = np.zeros(m)
        beta = np.zeros(m)
        vs[0] = psi / beta0
        k_used = m
        for j in range(m):
            w = matvec(vs[j])
            alpha[j] = np.real(np.vdot(vs[j], w))
            w = w - alpha[j] * vs[j] - (beta[j - 1] * vs[j - 1] if j > 0 else 0)
            # full reorthogonalization keeps the small projected problem honest
            w -= vs[: j + 1].T @ (vs[: j + 1].conj() @ w)
            beta[j] = np.linalg.norm(w)
            if beta[j] < 1e-14 * max(1.0, abs(alpha[j])):
                k_used = j + 1
                break
            vs[j + 1] = w / beta[j]
        while True:
            k = k_used
            tri = np.diag(alpha[:k]) + np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
            ew, ev = scipy.linalg.eigh(tri)
            coeff = ev @ (np.exp(-1j * h * ew) * ev[0].conj())
            err = beta[k - 1] * abs(coeff[-1]) if k == m else 0.0
            if err <= tol * h / dt or h < 1e-15:
                break
            h *= 0.5
        psi = beta0 * (vs[:k].T @ coeff)
        beta0 = np.linalg.norm(psi)
        t_done += h
        if err < 0.1 * tol * h / dt:
            h *= 1.5
    return psi


def _krylov_steps(terms, omegas, deltas, dt, psi, on_step):
    drive = terms.drive.tocsr()
    row_abs = np.asarray(abs(drive).sum(axis=1)).ravel()
    for k, (om, de) in enumerate(zip(omegas, deltas)):
        diag = terms.diag_interaction - de * terms.n_exc
        bound = float(np.max(np.abs(diag) + 0.5 * abs(om) * row_abs))

        def matvec(x, diag=diag, om=om):
            return diag * x + (0.5 * om) * (drive @ x)

        psi = lanczos_expm(matvec, psi, dt, bound)
        on_step(k + 1, psi)
    return psi


def evolve(
    psi0: QuantumState,
    terms: HamiltonianTerms,
    pulse: SampledPulse,
    record_interval: float | None = None,
    store_states: bool = False,
    method: str = "auto",
) -> Trajectory:
    """Propagate ``psi0`` through ``pulse``.

    Parameters
    ----------
    record_interval : float, optional
        Spacing (us) of recorded observables; must be a multiple of ``pulse.dt``.
        ``None`` records only the start and the end.
    store_states : bool
        Keep full state snapshots at the record times.
    method : {"auto", "dense", "krylov"}
    """
    if psi0.basis is not terms.basis:
        raise UsageError("initial state and Hamiltonian live on different bases")
    stride = _record_stride(pulse, record_interval)
    omegas, deltas = pulse.step_controls()
    if not (np.all(np.isfinite(omegas)) and np.all(np.isfinite(deltas))):
        raise NumericalError("pulse contains non-finite control values")
    n_steps = pulse.n_steps
    rec_steps = list(range(0, n_steps + 1, stride))
    if rec_steps[-1] != n_steps:
        rec_steps.append(n_steps)
    rec_pos = {k: i for i, k in enumerate(rec_steps)}
    times = pulse.t[rec_steps]
    n_exc = np.empty(len(rec_steps))
    norms = np.empty(len(rec_steps))
    states = np.empty((len(rec_steps), terms.dim), dtype=complex) if store_states else None

    def on_step(k, psi):
        i = rec_pos.get(k)
        if i is None:
            return
        pop = np.abs(psi) ** 2
        n_exc[i] = pop @ terms.n_exc
        norms[i] = np.sqrt(pop.sum())
        if states is not None:
            states[i] = psi

    psi = psi0.amplitudes.copy()
    on_step(0, psi)
    if method == "auto":
        method = "dense" if terms.dim <= DENSE_MAX_DIM else "krylov"
    if method == "dense":
        psi = _dense_steps(terms, omegas, deltas, pulse.dt, psi, on_step)
    elif method == "krylov":
        psi = _krylov_steps(terms, omegas, deltas, pulse.dt, psi, on_step)
    else:
        raise UsageError(f"unknown propagation method {method!r}")

    drift = np.max(np.abs(norms - 1.0))
    if not np.isfinite(drift) or drift > NORM_FAIL:
        raise NumericalError(f"norm drifted by {drift:.3g}; step size too large")
    return Trajectory(times, n_exc, norms, QuantumState.unchecked(terms.basis, psi), states)


def final_state(psi0, terms, pulse, method="auto") -> np.ndarray:
    """Final amplitudes only (optimizer inner loop)."""
    return evolve(psi0, terms, pulse, None, False, method).final.amplitudes


def dressed_low_spectrum(h: DrivenHamiltonian, k: int, v0: np.ndarray | None = None, dense_below: int = 64):
    """Lowest ``k`` eigenpairs of the driven Hamiltonian.

    Uses ARPACK in shift-invert mode with the shift below the Gershgorin
    bound, so the wanted eigenvalues are the dominant ones of the inverse.
    Tiny bases fall back to dense diagonalization.
    """
    dim = h.terms.dim
    if k < 1 or k > dim:
        raise UsageError(f"cannot compute {k} eigenpairs of a {dim}-dim operator")
    if dim <= dense_below or k >= dim - 1:
        w, v = np.linalg.eigh(h.dense())
        return w[:k], v[:, :k]
    mat = h.sparse().tocsc()
    diag = h.terms.diagonal(h.delta)
    row_abs = np.asarray(abs(mat - sp.diags(diag)).sum(axis=1)).ravel()
    lower = float(np.min(diag - row_abs))
    sigma = lower - 1.0 - 1e-3 * abs(lower)
    try:
        w, v = spla.eigsh(mat, k=k, sigma=sigma, which="LM", v0=v0, tol=1e-13, maxiter=10_000)
    except spla.ArpackNoConvergence as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from None
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    scale = h.norm_bound()
    resid = np.linalg.norm(mat @ v - v * w, axis=0)
    if np.any(resid > 1e-8 * max(scale, 1.0)):
        raise NumericalError(f"eigenpair residual {resid.max():.3g} too large")
    return w, v


@dataclass
class AdiabaticityTrace:
    times: np.ndarray
    energy: np.ndarray
    ground_energy: np.ndarray
    first_excited: np.ndarray
    overlap: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return self.first_excited - self.ground_energy

    @property
    def excess_energy(self) -> np.ndarray:
        return self.energy - self.ground_energy


def adiabaticity_trace(traj: Trajectory, terms: HamiltonianTerms, pulse: SampledPulse, k: int = 2) -> AdiabaticityTrace:
    """Energy, gap and ground-state overlap along a recorded trajectory."""
    if traj.states is None:
        raise UsageError("trajectory was recorded without states")
    idx = np.searchsorted(pulse.t, traj.times - 1e-12)
    energy, e0, e1, overlap = [], [], [], []
    v_prev = None
    for i, j in enumerate(idx):
        h = DrivenHamiltonian(terms, float(pulse.omega[j]), float(pulse.delta[j]))
        w, v = dressed_low_spectrum(h, min(k, terms.dim), v0=v_prev)
        g = v[:, 0]
        # align the arbitrary eigenvector sign with the previous record
        if v_prev is not None and np.dot(v_prev, g) < 0:
            g = -g
        v_prev = g
        psi = traj.states[i]
        energy.append(float(np.real(np.vdot(psi, h.matvec(psi)))))
        e0.append(float(w[0]))
        e1.append(float(w[1]) if len(w) > 1 else np.nan)
        overlap.append(float(abs(np.vdot(g, psi)) ** 2))
    return AdiabaticityTrace(traj.times, np.array(energy), np.array(e0), np.array(e1), np.array(overlap))
