"""Many-body configuration bases over super-atom units.

A configuration is a bitmask; bit ``i`` set means unit ``i`` is excited.
Configurations are ordered by (excitation number, bitmask value) so that
every excitation-number sector is a contiguous index range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rydopt.errors import ConfigError, DomainError, UsageError
from rydopt.lattice import SuperAtomChain

NORM_TOL = 1e-9


@dataclass(frozen=True)
class Truncation:
    """Basis restrictions.

    ``blockade_radius`` (um) drops every config with two excited units closer
    than it; ``max_excitations`` caps the excitation number.
    """

    blockade_radius: float | None = None
    max_excitations: int | None = None

    @property
    def is_none(self) -> bool:
        return self.blockade_radius is None and self.max_excitations is None


def popcount(masks: np.ndarray) -> np.ndarray:
    masks = np.asarray(masks, dtype=np.int64)
    count = np.zeros(masks.shape, dtype=np.int64)
    m = masks.copy()
    while np.any(m):
        count += m & 1
        m >>= 1
    return count


class ManyBodyBasis:
    def __init__(self, n_units: int, configs, truncation: Truncation = Truncation()):
        configs = np.unique(np.asarray(configs, dtype=np.int64))
        n_exc = popcount(configs)
        order = np.lexsort((configs, n_exc))
        self.n_units = n_units
        self.configs = configs[order]
        self.n_exc = n_exc[order]
        self.truncation = truncation
        self._sorted_vals = np.sort(self.configs)
        self._sorted_idx = np.argsort(self.configs, kind="stable")
        self.index_of = {int(c): i for i, c in enumerate(self.configs)}
        # contiguous sector ranges: sector n is configs[sector_start[n]:sector_start[n+1]]
        self.sector_start = np.searchsorted(self.n_exc, np.arange(n_units + 2))

    def __len__(self) -> int:
        return len(self.configs)

    @property
    def dim(self) -> int:
        return len(self.configs)

    def lookup(self, masks) -> np.ndarray:
        """Dense indices of ``masks``; -1 where a mask is not in the basis."""
        masks = np.asarray(masks, dtype=np.int64)
        pos = np.searchsorted(self._sorted_vals, masks)
        pos = np.clip(pos, 0, len(self._sorted_vals) - 1)
        hit = self._sorted_vals[pos] == masks
        return np.where(hit, self._sorted_idx[pos], -1)

    def bits(self) -> np.ndarray:
        """(dim, n_units) 0/1 occupation table."""
        return ((self.configs[:, None] >> np.arange(self.n_units)) & 1).astype(float)

    def __repr__(self) -> str:
        return f"ManyBodyBasis(n_units={self.n_units}, dim={self.dim})"


def build_basis(
    chain: SuperAtomChain,
    truncation: Truncation | None = None,
    drop_dead: bool = False,
) -> ManyBodyBasis:
    """Enumerate the allowed configurations of ``chain``.

    With ``drop_dead`` the dead units (no atoms) are never excited, which only
    removes configurations that are unreachable anyway.
    """
    truncation = truncation or Truncation()
    n = chain.n_units
    if n < 1:
        raise ConfigError("basis needs at least one unit")
    dist = chain.distances()
    kmax = truncation.max_excitations
    configs = np.zeros(1, dtype=np.int64)
    for k in range(n):
        if drop_dead and not chain.alive[k]:
            continue
        candidates = configs
        if truncation.blockade_radius is not None:
            conflict = 0
            for j in range(k):
                if dist[j, k] < truncation.blockade_radius:
                    conflict |= 1 << j
            candidates = candidates[(candidates & conflict) == 0]
        if kmax is not None:
            candidates = candidates[popcount(candidates) < kmax]
        configs = np.concatenate([configs, candidates | (1 << k)])
    if configs.size == 0:
        raise ConfigError("truncation leaves an empty basis")
    return ManyBodyBasis(n, configs, truncation)


@dataclass
class QuantumState:
    basis: ManyBodyBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise UsageError(f"amplitude vector of shape {amps.shape} does not match basis dim {self.basis.dim}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise DomainError(f"state is not normalized (norm {norm:.12g})")
        self.amplitudes = amps

    @classmethod
    def unchecked(cls, basis: ManyBodyBasis, amplitudes: np.ndarray) -> "QuantumState":
        """Wrap propagated amplitudes without re-validating the norm."""
        state = cls.__new__(cls)
        state.basis = basis
        state.amplitudes = np.asarray(amplitudes, dtype=complex)
        return state

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def fock_state(basis: ManyBodyBasis, bitmask: int) -> QuantumState:
    idx = basis.index_of.get(int(bitmask))
    if idx is None:
        raise DomainError(f"configuration {bitmask:#b} is excluded from the basis")
    amps = np.zeros(basis.dim, dtype=complex)
    amps[idx] = 1.0
    return QuantumState(basis, amps)


def ground_config(basis: ManyBodyBasis) -> QuantumState:
    return fock_state(basis, 0)


def embed(state: QuantumState, target: ManyBodyBasis) -> np.ndarray:
    """Amplitudes of ``state`` expressed in a larger basis ``target``."""
    idx = target.lookup(state.basis.configs)
    if np.any(idx < 0):
        raise UsageError("target basis does not contain the source basis")
    out = np.zeros(target.dim, dtype=complex)
    out[idx] = state.amplitudes
    return out
