import math

import numpy as np
import pytest
import scipy.linalg
from conftest import line_terms, terms_for

from rydopt.basis import QuantumState, Truncation, ground_config
from rydopt.errors import NumericalError, UsageError
from rydopt.hamiltonian import DrivenHamiltonian
from rydopt.lattice import build_bar
from rydopt.model import mhz_to_angular, vdw_interaction
from rydopt.propagator import (
    adiabaticity_trace,
    dressed_low_spectrum,
    evolve,
    final_state,
)
from rydopt.pulse import (
    ControlConstraints,
    FieldParams,
    FourierSeries,
    Guess,
    PulseParams,
    SampledPulse,
    linear_chirp_reference,
    synthesize,
    time_grid,
)

OMEGA = mhz_to_angular(0.4)


def constant_pulse(duration, dt, omega, delta=0.0):
    t = time_grid(duration, dt)
    return SampledPulse(t, np.full_like(t, omega), np.full_like(t, delta))


def random_state(basis, rng):
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    return QuantumState(basis, v / np.linalg.norm(v))


def test_rabi_oscillation(model):
    t1 = line_terms(model, 1)
    traj = evolve(ground_config(t1.basis), t1, constant_pulse(5.0, 1e-3, OMEGA), record_interval=1e-2)
    np.testing.assert_allclose(traj.n_exc, np.sin(OMEGA * traj.times / 2) ** 2, atol=1e-6)


def test_blockaded_pair_enhanced_rabi(model):
    t2 = line_terms(model, 2, spacing=1.0)
    v = vdw_interaction(model, model.lattice_spacing)
    pulse = constant_pulse(4.0, 1e-3, OMEGA)
    traj = evolve(ground_config(t2.basis), t2, pulse, record_interval=1e-3, store_states=True)
    # closed-form 3-level system |gg>, |s>, |ee>
    c = math.sqrt(2) * OMEGA / 2
    h3 = np.array([[0, c, 0], [c, 0, c], [0, c, v]])
    gg, ee = t2.basis.index_of[0], t2.basis.index_of[3]
    for k in (500, 1500, 3000, 4000):
        ref = scipy.linalg.expm(-1j * h3 * traj.times[k])[:, 0]
        assert abs(traj.states[k, gg]) ** 2 == pytest.approx(abs(ref[0]) ** 2, abs=1e-8)
    p_gg = np.abs(traj.states[:, gg]) ** 2
    t_min = traj.times[np.argmin(p_gg[: int(2.0 / 1e-3)])]
    assert math.pi / t_min == pytest.approx(math.sqrt(2) * OMEGA, rel=5e-3)
    assert np.max(np.abs(traj.states[:, ee]) ** 2) < 4 * (OMEGA / v) ** 2


def test_diagonal_phase_when_undriven(model, chain8_terms, rng):
    psi = random_state(chain8_terms.basis, rng)
    out = evolve(psi, chain8_terms, constant_pulse(1.0, 1e-2, 0.0, 1.3)).final.amplitudes
    diag = chain8_terms.diagonal(1.3)
    np.testing.assert_allclose(out, np.exp(-1j * diag * 1.0) * psi.amplitudes, atol=1e-10)


def smooth_pulse(dt, duration=3.0):
    params = PulseParams(
        duration,
        FieldParams(Guess("constant", OMEGA), (FourierSeries.from_vector((1.3,), [0.3, 0.2]),)),
        FieldParams(Guess("linear", -2.0, 3.0)),
    )
    return synthesize(params, ControlConstraints(omega_max=2 * OMEGA), dt)


def test_linearity_and_unitarity(corner_terms, rng):
    pulse = smooth_pulse(1e-2)
    a, b = random_state(corner_terms.basis, rng), random_state(corner_terms.basis, rng)
    ua = final_state(a, corner_terms, pulse)
    ub = final_state(b, corner_terms, pulse)
    s = (a.amplitudes + 2j * b.amplitudes)
    us = final_state(QuantumState(corner_terms.basis, s / np.linalg.norm(s)), corner_terms, pulse)
    np.testing.assert_allclose(us * np.linalg.norm(s), ua + 2j * ub, atol=1e-12)
    assert np.vdot(ua, ub) == pytest.approx(np.vdot(a.amplitudes, b.amplitudes), abs=1e-12)


def test_second_order_convergence(corner_terms):
    psi0 = ground_config(corner_terms.basis)
    ref = final_state(psi0, corner_terms, smooth_pulse(1e-2 / 32))
    errs = [np.linalg.norm(final_state(psi0, corner_terms, smooth_pulse(dt)) - ref) for dt in (2e-2, 1e-2)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)


def test_dense_and_krylov_agree(model, chain8_terms):
    pulse = linear_chirp_reference(3.0, -4.0, 6.0, OMEGA, dt=4e-3)
    psi0 = ground_config(chain8_terms.basis)
    d = final_state(psi0, chain8_terms, pulse, method="dense")
    k = final_state(psi0, chain8_terms, pulse, method="krylov")
    assert abs(np.vdot(d, k)) == pytest.approx(1.0, abs=1e-10)


def test_energy_conserved_for_constant_controls(corner_terms, rng):
    psi = random_state(corner_terms.basis, rng)
    h = DrivenHamiltonian(corner_terms, OMEGA, 1.1)
    traj = evolve(psi, corner_terms, constant_pulse(10.0, 1e-2, OMEGA, 1.1), record_interval=1.0, store_states=True)
    e = [np.real(np.vdot(s, h.matvec(s))) for s in traj.states]
    np.testing.assert_allclose(e, e[0], atol=1e-10)
    assert np.max(np.abs(traj.norms - 1)) < 1e-12


def test_basis_mismatch(model, corner_terms):
    other = line_terms(model, 2)
    with pytest.raises(UsageError):
        evolve(ground_config(other.basis), corner_terms, constant_pulse(1.0, 1e-2, 0.0))


def test_record_interval_must_divide(corner_terms):
    with pytest.raises(UsageError):
        evolve(ground_config(corner_terms.basis), corner_terms, constant_pulse(1.0, 1e-2, 0.0), record_interval=0.015)


def test_norm_failure_raises(corner_terms):
    pulse = constant_pulse(1.0, 1e-2, np.nan)
    with pytest.raises(NumericalError):
        evolve(ground_config(corner_terms.basis), corner_terms, pulse)


@pytest.mark.parametrize("omega, delta", [(OMEGA, 0.0), (2 * OMEGA, 5.0), (0.3, -2.0)])
def test_dressed_spectrum_matches_dense(model, omega, delta):
    t = line_terms(model, 8, spacing=1.5)
    h = DrivenHamiltonian(t, omega, delta)
    w, v = dressed_low_spectrum(h, 3)
    ref = np.linalg.eigvalsh(h.dense())[:3]
    np.testing.assert_allclose(w, ref, rtol=1e-8, atol=1e-8 * np.abs(ref).max())
    assert np.linalg.norm(h.dense() @ v - v * w) < 1e-6


def test_adiabatic_sweep_follows_ground_state(model):
    t = line_terms(model, 3, spacing=1.0)
    pulse = linear_chirp_reference(6.0, -mhz_to_angular(2.0), mhz_to_angular(2.0), OMEGA, dt=1e-2)
    traj = evolve(ground_config(t.basis), t, pulse, record_interval=0.5, store_states=True)
    tr = adiabaticity_trace(traj, t, pulse)
    assert np.all(tr.excess_energy > -1e-9)
    assert np.all(tr.gap[1:-1] > 0)
    assert tr.overlap[0] == pytest.approx(1.0)


def test_truncation_leakage_small(model):
    """Population on blockade-excluded configs stays small for the chain protocol."""
    geo = build_bar(3, 8)
    full = terms_for(geo, model)
    trunc = terms_for(geo, model, Truncation(blockade_radius=3.5 * model.lattice_spacing))
    pulse = linear_chirp_reference(4.0, -mhz_to_angular(2.0), mhz_to_angular(2.0), OMEGA, dt=4e-3)
    psi = final_state(ground_config(full.basis), full, pulse)
    kept = full.basis.lookup(trunc.basis.configs)
    assert 1.0 - np.sum(np.abs(psi[kept]) ** 2) < 1e-3
    psi_t = final_state(ground_config(trunc.basis), trunc, pulse)
    assert abs(np.vdot(psi[kept], psi_t)) ** 2 > 1 - 2e-3
