import math
import warnings

import numpy as np
import pytest
from conftest import line_terms

from rydopt.basis import QuantumState, build_basis, fock_state
from rydopt.errors import AmbiguityError, ConfigError, UsageError
from rydopt.hamiltonian import assemble
from rydopt.lattice import (
    LatticeRealization,
    build_corner_square,
    reduce_to_superatoms,
)
from rydopt.observables import (
    TargetState,
    crystal_config,
    decay_probability,
    ensemble_density_matrix,
    excitation_density,
    excitation_distribution,
    fidelity,
    ghz_state,
    mean_excitation,
    measure_configs,
    measure_ensemble,
    resolve_target,
    symmetric_state,
)


def random_state(basis, rng):
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    return QuantumState(basis, v / np.linalg.norm(v))


def test_readouts_consistent(chain8_terms, rng):
    for _ in range(20):
        psi = random_state(chain8_terms.basis, rng)
        p_n = excitation_distribution(psi)
        assert p_n.sum() == pytest.approx(1.0, abs=1e-12)
        n_mean = np.arange(len(p_n)) @ p_n
        assert excitation_density(psi).sum() == pytest.approx(n_mean, abs=1e-12)
        assert mean_excitation(psi) == pytest.approx(n_mean, abs=1e-12)


def test_fidelity_basics(model, corner_terms, rng):
    a, b = random_state(corner_terms.basis, rng), random_state(corner_terms.basis, rng)
    assert fidelity(a, a) == pytest.approx(1.0)
    assert 0 <= fidelity(a, b) <= 1
    assert fidelity(a, b) == pytest.approx(fidelity(b, a))
    other = line_terms(model, 2)
    with pytest.raises(UsageError):
        fidelity(a, fock_state(other.basis, 0))


def test_decay_probability():
    t = np.linspace(0, 3, 301)
    p = decay_probability(t, np.full_like(t, 2.0), 0.0118)
    assert p[-1] == pytest.approx(0.0118 * 2 * 3)
    assert np.all(np.diff(decay_probability(t, np.abs(np.sin(t)), 0.0118)) >= 0)


def test_ghz_target(corner_terms):
    psi = ghz_state(corner_terms.basis, math.pi / 2)
    amps = psi.amplitudes
    assert abs(amps[corner_terms.basis.index_of[0]]) ** 2 == pytest.approx(0.5)
    assert amps[corner_terms.basis.index_of[0b1111]] == pytest.approx(1j / math.sqrt(2))


def test_symmetric_target_normalizes_with_warning(corner_terms):
    with pytest.warns(UserWarning):
        target = TargetState("symmetric", coefficients=(1.0, 0.0, 0.0, 0.0, 1.0))
    psi = resolve_target(target, corner_terms)
    ghz = ghz_state(corner_terms.basis, 0.0)
    assert fidelity(psi, ghz) == pytest.approx(1.0)


def test_symmetric_dicke_weights(corner_terms):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        psi = symmetric_state(corner_terms.basis, (0.0, 1.0))
    pops = psi.populations()
    for m in (1, 2, 4, 8):
        assert pops[corner_terms.basis.index_of[m]] == pytest.approx(0.25)


def test_crystal_target_two_excitations(model, chain8_terms):
    cfg = crystal_config(chain8_terms, n_excitations=2)
    assert cfg == 0b10000001


def test_crystal_target_from_detuning(model):
    t = line_terms(model, 3, spacing=1.0)
    assert crystal_config(t, final_delta=2e4) == 0b101


def test_crystal_degenerate_raises(model):
    t = line_terms(model, 2, spacing=8.0)
    with pytest.raises(AmbiguityError):
        crystal_config(t, n_excitations=1)


def test_unknown_target_kind():
    with pytest.raises(ConfigError):
        TargetState("cat")


def test_dead_unit_targets(model):
    geo = build_corner_square(10, 2)
    occ = np.ones(geo.n_sites, bool)
    occ[list(geo.partition[2])] = False
    chain = reduce_to_superatoms(LatticeRealization(geo, occ, seed=None), model)
    terms = assemble(chain, build_basis(chain, drop_dead=True), model)
    psi = resolve_target(TargetState("ghz", theta=0.0), terms)
    assert abs(psi.amplitudes[terms.basis.index_of[0b1011]]) ** 2 == pytest.approx(0.5)


def test_measurement_statistics(corner_terms):
    psi = ghz_state(corner_terms.basis, 0.3)
    counts = measure_configs(psi, 20000, seed=4)
    assert set(counts) == {0, 0b1111}
    assert abs(counts[0] - 10000) < 4 * math.sqrt(5000)
    assert measure_configs(psi, 100, 4) == measure_configs(psi, 100, 4)
    hist = measure_ensemble([psi, fock_state(corner_terms.basis, 1)], 1000, 5)
    assert sum(hist.values()) == 1000


def test_ensemble_density_matrix(corner_terms):
    a = ghz_state(corner_terms.basis, 0.0)
    b = fock_state(corner_terms.basis, 0)
    rho = ensemble_density_matrix([a, b])
    assert np.trace(rho).real == pytest.approx(1.0)
    assert rho[0b1111, 0] == pytest.approx(0.25)
    assert rho[0, 0] == pytest.approx(0.75)
