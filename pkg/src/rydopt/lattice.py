"""Lattice geometries, defect sampling and the super-atom reduction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from rydopt.errors import ConfigError, ModelValidityError
from rydopt.model import PhysicalModel

DEFAULT_BLOCKADE_BOUND = 8.0  # in units of the lattice spacing


@dataclass(frozen=True)
class LatticeGeometry:
    """Site positions in units of the lattice spacing.

    ``partition`` lists the site indices of each natural super-atom group
    (columns of a bar, corner blocks of a square).
    """

    sites: np.ndarray
    partition: tuple[tuple[int, ...], ...]
    shape_tag: str

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "sites", sites)
        if len({tuple(s) for s in sites}) != len(sites):
            raise ConfigError("lattice sites must be distinct")
        covered = sorted(i for group in self.partition for i in group)
        if covered != list(range(len(sites))):
            raise ConfigError("partition must cover every site exactly once")

    @property
    def n_sites(self) -> int:
        return len(self.sites)


@dataclass(frozen=True)
class LatticeRealization:
    geometry: LatticeGeometry
    occupied: np.ndarray
    seed: int | None
    groups: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self):
        occ = np.asarray(self.occupied, dtype=bool)
        object.__setattr__(self, "occupied", occ)
        groups = tuple(tuple(i for i in g if occ[i]) for g in self.geometry.partition)
        object.__setattr__(self, "groups", groups)

    @property
    def n_occupied(self) -> int:
        return int(self.occupied.sum())

    @property
    def dead_units(self) -> list[int]:
        """Indices of super-atoms with no atom at all."""
        return [k for k, g in enumerate(self.groups) if not g]

    def to_json(self) -> str:
        return json.dumps(
            {
                "shape_tag": self.geometry.shape_tag,
                "sites": self.geometry.sites.tolist(),
                "partition": [list(g) for g in self.geometry.partition],
                "occupied": self.occupied.astype(int).tolist(),
                "seed": self.seed,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "LatticeRealization":
        d = json.loads(text)
        geom = LatticeGeometry(
            np.array(d["sites"], dtype=float),
            tuple(tuple(g) for g in d["partition"]),
            d["shape_tag"],
        )
        return cls(geom, np.array(d["occupied"], dtype=bool), d["seed"])


@dataclass(frozen=True)
class SuperAtomChain:
    """Effective two-level units, one per group.

    ``centers`` are in um; ``enhancements`` are sqrt(occupancy), zero for a
    dead unit. Dead units are kept so that unit indices are stable.
    """

    centers: np.ndarray
    enhancements: np.ndarray
    occupancy: np.ndarray

    @property
    def n_units(self) -> int:
        return len(self.enhancements)

    @property
    def alive(self) -> np.ndarray:
        return self.occupancy > 0

    def distances(self) -> np.ndarray:
        diff = self.centers[:, None, :] - self.centers[None, :, :]
        return np.sqrt((diff**2).sum(-1))


def build_bar(rows: int, cols: int) -> LatticeGeometry:
    if rows < 1 or cols < 1:
        raise ConfigError(f"bar dimensions must be positive, got {rows}x{cols}")
    sites = [(x, y) for x in range(cols) for y in range(rows)]
    partition = tuple(tuple(range(x * rows, (x + 1) * rows)) for x in range(cols))
    return LatticeGeometry(np.array(sites), partition, f"bar{{{rows},{cols}}}")


def build_corner_square(side: int, block: int) -> LatticeGeometry:
    """Four ``block x block`` clusters in the corners of a ``side x side`` grid."""
    if block < 1 or side < 1:
        raise ConfigError("side and block must be positive")
    if 2 * block > side:
        raise ConfigError(f"corner blocks of size {block} overlap on a {side}x{side} grid")
    origins = [(0, 0), (side - block, 0), (0, side - block), (side - block, side - block)]
    sites, partition = [], []
    for ox, oy in origins:
        start = len(sites)
        sites.extend((ox + i, oy + j) for i in range(block) for j in range(block))
        partition.append(tuple(range(start, len(sites))))
    return LatticeGeometry(np.array(sites), tuple(partition), f"corner_square{{{side},{block}}}")


def build_custom(sites, partition=None) -> LatticeGeometry:
    sites = np.asarray(sites, dtype=float).reshape(-1, 2)
    if partition is None:
        partition = tuple((i,) for i in range(len(sites)))
    return LatticeGeometry(sites, tuple(tuple(g) for g in partition), "custom")


def sample_realization(geometry: LatticeGeometry, filling: float, seed) -> LatticeRealization:
    """Independent Bernoulli occupation of every site."""
    if not 0.0 <= filling <= 1.0:
        raise ConfigError(f"filling must lie in [0, 1], got {filling}")
    rng = np.random.default_rng(seed)
    occupied = rng.random(geometry.n_sites) < filling
    return LatticeRealization(geometry, occupied, seed)


def perfect_realization(geometry: LatticeGeometry) -> LatticeRealization:
    return LatticeRealization(geometry, np.ones(geometry.n_sites, dtype=bool), None)


def reduce_to_superatoms(
    realization: LatticeRealization,
    model: PhysicalModel,
    blockade_bound: float = DEFAULT_BLOCKADE_BOUND,
) -> SuperAtomChain:
    """Collapse each group into one unit with sqrt(n) enhanced coupling.

    Parameters
    ----------
    blockade_bound : float
        Maximal allowed group diameter, in units of the lattice spacing.
    """
    geom = realization.geometry
    centers, enh, occ = [], [], []
    for nominal, group in zip(geom.partition, realization.groups):
        pts = geom.sites[list(nominal)]
        diam = np.max(np.linalg.norm(pts[:, None] - pts[None], axis=-1)) if len(pts) > 1 else 0.0
        if diam >= blockade_bound:
            raise ModelValidityError(
                f"group diameter {diam:.3g}a exceeds the blockade bound {blockade_bound}a"
            )
        # dead units sit at their nominal center; they are never excited
        used = geom.sites[list(group)] if group else pts
        centers.append(used.mean(axis=0))
        occ.append(len(group))
        enh.append(np.sqrt(len(group)))
    return SuperAtomChain(
        centers=np.array(centers) * model.lattice_spacing,
        enhancements=np.array(enh),
        occupancy=np.array(occ, dtype=int),
    )


def sample_ensemble(geometry, filling, n_realizations, seed) -> list[LatticeRealization]:
    """``n_realizations`` defect samples with child seeds spawned from ``seed``."""
    if filling >= 1.0:
        return [perfect_realization(geometry) for _ in range(n_realizations)]
    children = np.random.SeedSequence(seed).spawn(n_realizations)
    seeds = [int(c.generate_state(1)[0]) for c in children]
    return [sample_realization(geometry, filling, s) for s in seeds]
