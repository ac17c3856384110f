"""Driven Rydberg Hamiltonian over a configuration basis.

    H = (Omega/2) sum_i sqrt(n_i) sigma_x^(i) + sum_{i<j} V_ij n_i n_j - Delta sum_i n_i

The static pieces (interaction diagonal, excitation count, drive adjacency)
are assembled once into :class:`HamiltonianTerms`; ``Omega`` and ``Delta``
are supplied per call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from rydopt.basis import ManyBodyBasis, QuantumState
from rydopt.errors import UsageError
from rydopt.lattice import SuperAtomChain
from rydopt.model import PhysicalModel, vdw_interaction


@dataclass(frozen=True)
class HamiltonianTerms:
    basis: ManyBodyBasis
    chain: SuperAtomChain
    pair_interactions: np.ndarray  # (n_units, n_units), zero diagonal
    diag_interaction: np.ndarray
    n_exc: np.ndarray
    drive_rows: np.ndarray
    drive_cols: np.ndarray
    drive_weights: np.ndarray
    drive: sp.csr_matrix  # symmetric, H_drive = (Omega/2) * drive

    @property
    def dim(self) -> int:
        return self.basis.dim

    def diagonal(self, delta: float) -> np.ndarray:
        return self.diag_interaction - delta * self.n_exc

    def dense_drive(self) -> np.ndarray:
        return self.drive.toarray()


def pair_interactions(chain: SuperAtomChain, model: PhysicalModel) -> np.ndarray:
    n = chain.n_units
    v = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    if len(iu[0]):
        vals = vdw_interaction(model, chain.distances()[iu])
        v[iu] = vals
        v[(iu[1], iu[0])] = vals
    return v


def assemble(chain: SuperAtomChain, basis: ManyBodyBasis, model: PhysicalModel) -> HamiltonianTerms:
    if chain.n_units != basis.n_units:
        raise UsageError(f"chain has {chain.n_units} units but basis has {basis.n_units}")
    v = pair_interactions(chain, model)
    bits = basis.bits()
    diag = 0.5 * np.einsum("ci,ij,cj->c", bits, v, bits)
    rows, cols, weights = [], [], []
    for k in range(chain.n_units):
        if chain.enhancements[k] == 0:
            continue
        lower = np.flatnonzero((basis.configs >> k) & 1 == 0)
        upper = basis.lookup(basis.configs[lower] | (1 << k))
        ok = upper >= 0
        rows.append(lower[ok])
        cols.append(upper[ok])
        weights.append(np.full(ok.sum(), chain.enhancements[k]))
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    weights = np.concatenate(weights) if weights else np.zeros(0)
    drive = sp.coo_matrix(
        (np.concatenate([weights, weights]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(basis.dim, basis.dim),
    ).tocsr()
    return HamiltonianTerms(
        basis=basis,
        chain=chain,
        pair_interactions=v,
        diag_interaction=diag,
        n_exc=basis.n_exc.astype(float),
        drive_rows=rows,
        drive_cols=cols,
        drive_weights=weights,
        drive=drive,
    )


@dataclass(frozen=True)
class DrivenHamiltonian:
    terms: HamiltonianTerms
    omega: float
    delta: float

    def sparse(self) -> sp.csr_matrix:
        t = self.terms
        return (0.5 * self.omega) * t.drive + sp.diags(t.diagonal(self.delta))

    def dense(self) -> np.ndarray:
        t = self.terms
        h = (0.5 * self.omega) * t.dense_drive()
        h[np.diag_indices_from(h)] += t.diagonal(self.delta)
        return h

    def matvec(self, vec: np.ndarray) -> np.ndarray:
        t = self.terms
        return t.diagonal(self.delta) * vec + (0.5 * self.omega) * (t.drive @ vec)

    def norm_bound(self) -> float:
        """Gershgorin bound on the spectral radius."""
        t = self.terms
        row_abs = np.asarray(abs(t.drive).sum(axis=1)).ravel()
        return float(np.max(np.abs(t.diagonal(self.delta)) + 0.5 * abs(self.omega) * row_abs))


def apply(h: DrivenHamiltonian, psi: QuantumState | np.ndarray) -> np.ndarray:
    """``H|psi>`` in rad/us."""
    if isinstance(psi, QuantumState):
        if psi.basis is not h.terms.basis:
            raise UsageError("state and Hamiltonian live on different bases")
        vec = psi.amplitudes
    else:
        vec = np.asarray(psi)
        if vec.shape[0] != h.terms.dim:
            raise UsageError("vector length does not match the basis")
    return h.matvec(vec)


def classical_spectrum(terms: HamiltonianTerms, delta: float):
    """Omega -> 0 eigenvalues sorted ascending.

    Returns ``(energies, bitmasks, n_exc)``; ties keep basis order.
    """
    e = terms.diagonal(delta)
    order = np.argsort(e, kind="stable")
    return e[order], terms.basis.configs[order], terms.basis.n_exc[order]


def critical_detuning(terms: HamiltonianTerms, n_units: int | None = None) -> float:
    """Detuning at which all-ground and all-excited (live units) are degenerate."""
    alive = terms.chain.alive
    n = int(alive.sum()) if n_units is None else n_units
    if n < 2:
        raise UsageError("critical detuning needs at least two units")
    v = terms.pair_interactions[np.ix_(alive, alive)]
    return float(np.triu(v, 1).sum() / n)


def end_to_end_interaction(model: PhysicalModel, n_units: int) -> float:
    """V_L = C6 / L^6 for a chain of ``n_units`` with spacing ``a``."""
    return vdw_interaction(model, (n_units - 1) * model.lattice_spacing)
