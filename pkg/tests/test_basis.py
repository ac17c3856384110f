import itertools

import numpy as np
import pytest

from rydopt.basis import Truncation, build_basis, fock_state, ground_config
from rydopt.errors import DomainError
from rydopt.lattice import build_custom, perfect_realization, reduce_to_superatoms


def line_chain(model, n):
    return reduce_to_superatoms(perfect_realization(build_custom([(i, 0) for i in range(n)])), model)


def brute_no_adjacent(n):
    return sum(
        1 for bits in itertools.product((0, 1), repeat=n) if not any(a and b for a, b in zip(bits, bits[1:]))
    )


def test_full_basis_size(model):
    assert build_basis(line_chain(model, 8)).dim == 256


def test_blockade_truncation_matches_enumeration(model):
    chain = line_chain(model, 8)
    basis = build_basis(chain, Truncation(blockade_radius=1.5 * model.lattice_spacing))
    assert brute_no_adjacent(8) == 55
    assert basis.dim == 55


def test_max_excitations(model):
    assert build_basis(line_chain(model, 4), Truncation(max_excitations=1)).dim == 5


def test_ordering_and_index_map(model):
    basis = build_basis(line_chain(model, 6), Truncation(blockade_radius=2.5 * model.lattice_spacing))
    assert all(basis.index_of[int(c)] == i for i, c in enumerate(basis.configs))
    keys = list(zip(basis.n_exc, basis.configs))
    assert keys == sorted(keys)
    assert np.all(basis.lookup(basis.configs) == np.arange(basis.dim))
    assert basis.lookup([0b11])[0] == -1


def test_truncated_is_subset(model):
    chain = line_chain(model, 7)
    full = build_basis(chain)
    trunc = build_basis(chain, Truncation(blockade_radius=1.5 * model.lattice_spacing))
    assert set(trunc.configs.tolist()) <= set(full.configs.tolist())


def test_ground_and_fock_states(model):
    basis = build_basis(line_chain(model, 3))
    g = ground_config(basis)
    assert g.amplitudes[basis.index_of[0]] == 1
    assert np.linalg.norm(g.amplitudes) == pytest.approx(1)
    assert g.populations() @ basis.n_exc == 0
    np.testing.assert_array_equal(fock_state(basis, 0).amplitudes, g.amplitudes)
    e = fock_state(basis, 0b111)
    assert e.amplitudes[-1] == 1


def test_excluded_fock_state_rejected(model):
    basis = build_basis(line_chain(model, 3), Truncation(blockade_radius=1.5 * model.lattice_spacing))
    with pytest.raises(DomainError):
        fock_state(basis, 0b011)


def test_drop_dead_units(model):
    from rydopt.lattice import LatticeRealization, build_bar

    occ = np.ones(9, dtype=bool)
    occ[3:6] = False
    chain = reduce_to_superatoms(LatticeRealization(build_bar(3, 3), occ, None), model)
    assert build_basis(chain).dim == 8
    basis = build_basis(chain, drop_dead=True)
    assert basis.dim == 4
    assert not np.any(basis.configs & 0b010)
