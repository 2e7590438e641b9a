"""Atom geometries and finite-range interaction matrices.

Positions are stored in units of the lattice constant a, so every distance
handed to :func:`interaction_matrix` is a dimensionless ratio and the
soft-core radius is passed as r_c = R_C/a.  Open boundary conditions
everywhere; only filled sites enter the spin register.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "Geometry",
    "InteractionMatrix",
    "DressingParams",
    "build_chain",
    "build_square",
    "build_triangular",
    "random_fill",
    "interaction_matrix",
    "dressing_derive",
]


@dataclass
class Geometry:
    """A set of candidate lattice sites with a boolean filling mask.

    positions are (x, y) pairs in units of a.  ``n_atoms`` counts filled
    sites only; empty sites are excluded from the spin register entirely.
    """

    lattice: str
    a: float
    positions: np.ndarray
    filled: np.ndarray

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.filled = np.asarray(self.filled, dtype=bool)
        if self.positions.shape[1] != 2:
            raise InvalidArgumentError("positions must be (n_sites, 2)")
        if self.filled.shape != (self.positions.shape[0],):
            raise InvalidArgumentError("filled mask length must match positions")
        if not np.all(np.isfinite(self.positions)):
            raise InvalidArgumentError("positions must be finite")
        if self.n_atoms < 1:
            raise InvalidArgumentError("need at least one filled site")
        pts = self.filled_positions
        if len({(round(x, 12), round(y, 12)) for x, y in pts}) != len(pts):
            raise InvalidArgumentError("filled positions must be distinct")

    @property
    def n_sites(self) -> int:
        return self.positions.shape[0]

    @property
    def n_atoms(self) -> int:
        return int(self.filled.sum())

    @property
    def filled_positions(self) -> np.ndarray:
        return self.positions[self.filled]

    def to_dict(self) -> dict:
        return {
            "lattice": self.lattice,
            "a": self.a,
            "positions": self.positions.tolist(),
            "filled": self.filled.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Geometry":
        return cls(
            lattice=d["lattice"],
            a=float(d["a"]),
            positions=np.asarray(d["positions"], dtype=float),
            filled=np.asarray(d["filled"], dtype=bool),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "Geometry":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class InteractionMatrix:
    """Symmetric pairwise couplings V_ij plus on-site shifts delta_i.

    Units: energy with hbar = 1, so times are measured in 1/V0.  ``onsite``
    defaults to zero because the composed interaction gates cancel single
    body z shifts by a spin echo; a nonzero vector exists only to test that
    cancellation.
    """

    V: np.ndarray
    onsite: np.ndarray = field(default=None)

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=float)
        n = self.V.shape[0]
        if self.V.shape != (n, n):
            raise InvalidArgumentError("V must be square")
        if self.onsite is None:
            self.onsite = np.zeros(n)
        self.onsite = np.asarray(self.onsite, dtype=float)
        if self.onsite.shape != (n,):
            raise InvalidArgumentError("onsite must have one entry per atom")
        if not np.allclose(self.V, self.V.T, atol=1e-14):
            raise InvalidArgumentError("V must be symmetric")
        if np.any(np.abs(np.diag(self.V)) > 0):
            raise InvalidArgumentError("V must be zero on the diagonal")

    @property
    def n_atoms(self) -> int:
        return self.V.shape[0]


@dataclass
class DressingParams:
    """Laser parameters of the off-resonant Rydberg dressing scheme.

    rabi and detuning are angular frequencies, c6 the van-der-Waals
    coefficient (angular frequency times length^6), rydberg_lifetime a time.
    """

    rabi: float
    detuning: float
    c6: float
    rydberg_lifetime: float

    def __post_init__(self):
        if self.rabi <= 0:
            raise InvalidArgumentError("rabi must be positive")
        if self.detuning == 0:
            raise InvalidArgumentError("detuning must be nonzero")
        if self.rabi / abs(self.detuning) > 0.5:
            warnings.warn(
                "weak-dressing expansion dubious: rabi/|detuning| > 0.5",
                stacklevel=2,
            )


def build_chain(n_sites: int, a: float = 1.0) -> Geometry:
    """1D chain of equally spaced sites at (k*a, 0), all filled."""
    if n_sites < 1:
        raise InvalidArgumentError("n_sites must be >= 1")
    pos = np.column_stack([np.arange(n_sites, dtype=float), np.zeros(n_sites)])
    return Geometry("chain", a, pos, np.ones(n_sites, dtype=bool))


def build_square(rows: int, cols: int, a: float = 1.0) -> Geometry:
    """rows x cols square grid, all filled."""
    if rows < 1 or cols < 1:
        raise InvalidArgumentError("rows and cols must be >= 1")
    ii, jj = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    pos = np.column_stack([ii.ravel().astype(float), jj.ravel().astype(float)])
    return Geometry("square", a, pos, np.ones(rows * cols, dtype=bool))


def build_triangular(rows: int, cols: int, a: float = 1.0) -> Geometry:
    """Triangular lattice: odd rows offset by a/2, row spacing a*sqrt(3)/2.

    Nearest-neighbor distance is a; a bulk site has six equidistant
    neighbors.
    """
    if rows < 1 or cols < 1:
        raise InvalidArgumentError("rows and cols must be >= 1")
    pos = []
    for r in range(rows):
        for c in range(cols):
            pos.append((c + 0.5 * (r % 2), r * np.sqrt(3.0) / 2.0))
    return Geometry("triangular", a, np.array(pos), np.ones(rows * cols, dtype=bool))


def random_fill(geom: Geometry, fraction: float, seed: int) -> Geometry:
    """Keep round(fraction * n_sites) sites, chosen uniformly by a seeded RNG.

    Same seed gives the same pattern bit for bit.  The draw is over all
    sites of ``geom`` regardless of its current mask.
    """
    if not 0.0 < fraction <= 1.0:
        raise InvalidArgumentError("fraction must be in (0, 1]")
    n_keep = int(round(fraction * geom.n_sites))
    if n_keep < 1:
        raise InvalidArgumentError("fraction keeps no sites")
    rng = np.random.default_rng(seed)
    keep = rng.choice(geom.n_sites, size=n_keep, replace=False)
    mask = np.zeros(geom.n_sites, dtype=bool)
    mask[keep] = True
    return Geometry(geom.lattice, geom.a, geom.positions.copy(), mask)


def interaction_matrix(geom: Geometry, r_c: float, v0: float = 1.0) -> InteractionMatrix:
    """Soft-core couplings V_ij = v0 * r_c^6 / (d_ij^6 + r_c^6) on filled sites.

    ``r_c`` is the interaction radius in units of the lattice constant,
    matching the dimensionless positions stored in ``geom``.
    """
    if r_c <= 0:
        raise InvalidArgumentError("r_c must be positive")
    if v0 <= 0:
        raise InvalidArgumentError("v0 must be positive")
    pts = geom.filled_positions
    if len(pts) < 1:
        raise InvalidArgumentError("geometry has no filled sites")
    diff = pts[:, None, :] - pts[None, :, :]
    d6 = (diff**2).sum(-1) ** 3
    rc6 = r_c**6
    V = v0 * rc6 / (d6 + rc6)
    np.fill_diagonal(V, 0.0)
    return InteractionMatrix(V=V)


def dressing_derive(p: DressingParams) -> dict:
    """Derived dressing quantities {v0, r_c, eta_c} (hbar = 1).

    v0 = (rabi / 2 detuning)^3 * rabi, r_c = |c6 / 2 detuning|^(1/6), and
    eta_c = (rabi / 2|detuning|) * rabi * rydberg_lifetime, the number of
    coherent interaction cycles per effective decay time.  eta_c uses the
    magnitude of the detuning because it is a ratio of two positive times.
    """
    v0 = (p.rabi / (2.0 * p.detuning)) ** 3 * p.rabi
    r_c = abs(p.c6 / (2.0 * p.detuning)) ** (1.0 / 6.0)
    eta_c = (p.rabi / (2.0 * abs(p.detuning))) * p.rabi * p.rydberg_lifetime
    return {"v0": v0, "r_c": r_c, "eta_c": eta_c}
