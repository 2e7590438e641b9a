"""Diagnostics on full-register states.

Angular-momentum shell populations p_j are extracted with the Lagrange
form of the spectral projector of J^2,

    Pi_j = prod_{k != j} (J^2 - k(k+1)) / (j(j+1) - k(k+1)),

applied as repeated matrix-free J^2 actions, so no Schur transform or
explicit |j, m, alpha> basis is ever built.  The same projector feeds the
per-shell Husimi distributions: Q^j(phi, theta) is the squared overlap of
the state with the rotated highest-weight sector of shell j.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from . import kernels, statevec
from .errors import InvalidArgumentError, NumericalInstabilityError
from .statevec import StateVector, _m_table, _rotation_2x2

__all__ = [
    "ShellSpectrum",
    "degeneracy",
    "shell_values",
    "shell_populations",
    "shell_population",
    "qfi_max",
    "xi2_invariant",
    "sphere_grid",
    "husimi",
]


def degeneracy(n_atoms: int, j) -> int:
    """Number of inequivalent copies of shell j for N spins (exact integer)."""
    t = n_atoms / 2.0 - j
    if t < -1e-9 or abs(t - round(t)) > 1e-9:
        raise InvalidArgumentError(f"j={j} is not a valid shell for N={n_atoms}")
    t = int(round(t))
    if t > n_atoms // 2:
        raise InvalidArgumentError(f"j={j} is below the lowest shell for N={n_atoms}")
    d = comb(n_atoms, t) - (comb(n_atoms, t - 1) if t >= 1 else 0)
    return d


def shell_values(n_atoms: int) -> np.ndarray:
    """All j values, descending from N/2 to 0 or 1/2."""
    n_shells = n_atoms // 2 + 1
    return n_atoms / 2.0 - np.arange(n_shells)


@dataclass
class ShellSpectrum:
    """Populations and degeneracies per angular-momentum shell."""

    j_values: np.ndarray
    populations: np.ndarray
    degeneracies: np.ndarray


def _j2_apply(amps: np.ndarray, n_atoms: int) -> np.ndarray:
    """J^2 |psi> = (J_x^2 + J_y^2 + J_z^2)|psi>, matrix-free."""
    wx = np.zeros_like(amps)
    kernels.accumulate_jx(amps, wx, n_atoms)
    out = np.zeros_like(amps)
    kernels.accumulate_jx(wx, out, n_atoms)
    wy = np.zeros_like(amps)
    kernels.accumulate_jy(amps, wy, n_atoms)
    kernels.accumulate_jy(wy, out, n_atoms)
    m = _m_table(n_atoms)
    out += amps * (m * m)
    return out


def _project_shell(amps: np.ndarray, n_atoms: int, j: float) -> np.ndarray:
    """Apply the Lagrange projector of shell j to an amplitude array.

    Factors are applied in order of decreasing |j(j+1) - k(k+1)| which
    keeps intermediate amplification small; the scalar coefficients are
    prepared in extended precision.
    """
    js = shell_values(n_atoms)
    lam = (js * (js + 1.0)).astype(np.longdouble)
    lam_j = np.longdouble(j) * (np.longdouble(j) + 1.0)
    others = [k for k in range(len(js)) if abs(js[k] - j) > 1e-9]
    others.sort(key=lambda k: -abs(float(lam_j - lam[k])))
    phi = amps.copy()
    for k in others:
        denom = float(lam_j - lam[k])
        shift = float(lam[k])
        phi = (_j2_apply(phi, n_atoms) - shift * phi) / denom
    return phi


def shell_populations(state: StateVector, validate: bool = False) -> ShellSpectrum:
    """p_j = <psi| Pi_j |psi> for every shell, plus degeneracies.

    With ``validate=True`` the projector is checked for idempotence,
    ||Pi_j (Pi_j psi) - Pi_j psi|| < 1e-6, on every shell holding more
    than 1e-4 of the population; failure raises NumericalInstabilityError.
    """
    n = state.n_atoms
    js = shell_values(n)
    pops = np.empty(len(js))
    projected = []
    for i, j in enumerate(js):
        phi = _project_shell(state.amps, n, j)
        pops[i] = np.vdot(state.amps, phi).real
        projected.append(phi)
    if validate:
        for i, j in enumerate(js):
            if pops[i] > 1e-4:
                resid = np.linalg.norm(_project_shell(projected[i], n, j) - projected[i])
                if resid > 1e-6:
                    raise NumericalInstabilityError(
                        f"projector for shell j={j} not idempotent (residual {resid:.2e})"
                    )
    pops = np.clip(pops, 0.0, None)
    degs = np.array([degeneracy(n, j) for j in js])
    return ShellSpectrum(j_values=js, populations=pops, degeneracies=degs)


def shell_population(state: StateVector, j) -> float:
    """Population of one shell (cheaper than the full spectrum)."""
    degeneracy(state.n_atoms, j)  # validates j
    phi = _project_shell(state.amps, state.n_atoms, float(j))
    return max(float(np.vdot(state.amps, phi).real), 0.0)


def qfi_max(state: StateVector) -> float:
    """Largest quantum Fisher information over rotation axes.

    For a pure state this is 4 times the largest eigenvalue of the
    symmetrized covariance matrix of (J_x, J_y, J_z); F/N > k witnesses
    k-partite entanglement.
    """
    e = statevec.collective_expectations(state)
    return float(4.0 * np.linalg.eigvalsh(e.cov)[-1])


def xi2_invariant(state: StateVector) -> float:
    """Rotationally invariant squeezing parameter (any Bloch direction)."""
    return statevec.xi2_exact(state)


def sphere_grid(n_theta: int = 64, n_phi: int = 128) -> tuple:
    """Default product grid on the sphere: Gauss-Legendre nodes in cos(theta)
    by uniform midpoints in phi.

    Returns (points, weights): points is an (n_theta*n_phi, 2) array of
    (phi, theta) pairs, weights sum to 4*pi.  Gauss-Legendre nodes make the
    quadrature exact for every band-limited Q^j, so the resolution-of-
    identity check holds to rounding error; the nodes are still close to
    uniform in cos(theta) for plotting.
    """
    x, w = np.polynomial.legendre.leggauss(n_theta)
    thetas = np.arccos(x)
    dphi = 2.0 * np.pi / n_phi
    phis = (np.arange(n_phi) + 0.5) * dphi
    pts = np.empty((n_theta * n_phi, 2))
    pts[:, 0] = np.tile(phis, n_theta)
    pts[:, 1] = np.repeat(thetas, n_phi)
    weights = np.repeat(w * dphi, n_phi)
    return pts, weights


@lru_cache(maxsize=8)
def _popcount_indices(n_atoms: int):
    pc = np.bitwise_count(np.arange(1 << n_atoms, dtype=np.uint64)).astype(np.int64)
    return tuple(np.where(pc == k)[0] for k in range(n_atoms + 1))


def husimi(state: StateVector, j, grid) -> np.ndarray:
    """Per-shell Husimi distribution Q^j at the given (phi, theta) points.

    Q^j(phi, theta) is the total overlap of the state with the coherent
    spin states of shell j pointing along (theta, phi), summed over the
    degenerate copies of the shell:

        Q^j = || P_{m=j} R(phi, theta)^dag Pi_j |psi> ||^2,

    with R(phi, theta) = R_z(phi) R_y(theta) the rotation taking z to that
    direction and P_{m=j} the z-magnetization sector m = j.  At theta = 0
    the distribution of |up_z>^N on its outer shell is exactly 1.

    Implementation: the projected state is split into magnetization
    components once; for each distinct theta a single set of y rotations
    serves every phi in the grid, with the phi phases applied analytically.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.size == 0 or grid.shape[1] != 2:
        raise InvalidArgumentError("grid must be a non-empty list of (phi, theta) pairs")
    n = state.n_atoms
    degeneracy(n, j)  # validates j
    sector_k = int(round(n / 2.0 + j))

    chi = _project_shell(state.amps, n, float(j))
    idx_by_k = _popcount_indices(n)
    comps = [chi[idx] for idx in idx_by_k]
    active = [k for k in range(n + 1) if np.linalg.norm(comps[k]) > 1e-15]
    sector_idx = idx_by_k[sector_k]
    m_of_k = np.arange(n + 1, dtype=float) - n / 2.0

    out = np.empty(len(grid))
    order = np.argsort(grid[:, 1], kind="stable")
    buf = np.empty(1 << n, dtype=np.complex128)
    pos = 0
    while pos < len(order):
        theta = grid[order[pos], 1]
        group = [order[pos]]
        pos += 1
        while pos < len(order) and grid[order[pos], 1] == theta:
            group.append(order[pos])
            pos += 1
        u = _rotation_2x2("y", -theta)
        g = np.zeros((len(sector_idx), n + 1), dtype=np.complex128)
        for k in active:
            buf[:] = 0.0
            buf[idx_by_k[k]] = comps[k]
            for spin in range(n):
                kernels.apply_single_qubit(buf, n, spin, *u)
            g[:, k] = buf[sector_idx]
        phis = grid[group, 0]
        phases = np.exp(1j * np.outer(m_of_k, phis))
        q = np.abs(g @ phases) ** 2
        out[group] = q.sum(axis=0)
    return out
