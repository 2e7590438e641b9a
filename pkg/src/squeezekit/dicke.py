"""Permutation-symmetric engine on the maximal-spin shell.

States live in the (N+1)-dimensional j = N/2 multiplet, stored as
amplitudes c_k with k = 0..N and m = k - N/2.  This is the natural home
for infinite-range dynamics: one-axis twisting exp(-i tau J_z^2),
two-axis twisting exp(-i tau (J_z^2 - J_y^2)), global rotations, and the
simplified layer R_x(theta) exp(-i tau J_z^2).

Relation to the full engine: sum_{i<j} s_i^z s_j^z = (J_z^2 - N/4)/2, so
an all-to-all zz gate of duration tau and coupling v0 in the state-vector
engine equals a twisting phase of tau * v0 / 2 here, up to a global phase
from the identity shift.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from . import statevec
from .errors import CapacityError, InvalidArgumentError
from .statevec import CollectiveExpectations, xi2_from_moments

__all__ = [
    "DickeVector",
    "DickeOperators",
    "coherent_x",
    "dicke_operators",
    "oat_evolve",
    "tat_evolve",
    "oat_optimal_xi2",
    "trial_state",
    "squeezing_limit",
    "simplified_circuit",
    "embed_to_full",
    "collective_expectations",
    "xi2",
]


class DickeVector:
    """N+1 complex amplitudes on the outer angular-momentum shell."""

    __slots__ = ("amps", "n_atoms")

    def __init__(self, amps: np.ndarray, n_atoms: int):
        amps = np.ascontiguousarray(amps, dtype=np.complex128)
        if amps.shape != (n_atoms + 1,):
            raise InvalidArgumentError("amplitude array must have length N+1")
        self.amps = amps
        self.n_atoms = n_atoms

    def copy(self) -> "DickeVector":
        return DickeVector(self.amps.copy(), self.n_atoms)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def fidelity(self, other: "DickeVector") -> float:
        return float(abs(np.vdot(self.amps, other.amps)))


def _m_values(n_atoms: int) -> np.ndarray:
    return np.arange(n_atoms + 1, dtype=float) - n_atoms / 2.0

def _raise_coeffs(n_atoms: int) -> np.ndarray:
    """a_k = sqrt((N-k)(k+1)): J+ amplitude from index k to k+1."""
    k = np.arange(n_atoms, dtype=float)
    return np.sqrt((n_atoms - k) * (k + 1.0))


def coherent_x(n_atoms: int) -> DickeVector:
    """Coherent state along +x: binomial amplitudes sqrt(C(N,k)) / 2^(N/2)."""
    k = np.arange(n_atoms + 1, dtype=float)
    log_c = 0.5 * (
        gammaln(n_atoms + 1.0) - gammaln(k + 1.0) - gammaln(n_atoms - k + 1.0)
    ) - n_atoms / 2.0 * np.log(2.0)
    return DickeVector(np.exp(log_c).astype(np.complex128), n_atoms)


@dataclass
class DickeOperators:
    """Dense (N+1)x(N+1) matrices of the collective spin algebra."""

    jz: np.ndarray
    jp: np.ndarray
    jm: np.ndarray
    jx: np.ndarray
    jy: np.ndarray


@lru_cache(maxsize=8)
def dicke_operators(n_atoms: int) -> DickeOperators:
    """J_z, J_+, J_-, J_x, J_y on the shell, row index = output component."""
    if n_atoms < 1:
        raise InvalidArgumentError("n_atoms must be >= 1")
    m = _m_values(n_atoms)
    a = _raise_coeffs(n_atoms)
    jz = np.diag(m)
    jp = np.zeros((n_atoms + 1, n_atoms + 1))
    jp[np.arange(1, n_atoms + 1), np.arange(n_atoms)] = a
    jm = jp.T.copy()
    jx = (jp + jm) / 2.0
    jy = (jp - jm) / 2j
    return DickeOperators(jz=jz, jp=jp, jm=jm, jx=jx.astype(complex), jy=jy)


def oat_evolve(state: DickeVector, tau: float) -> DickeVector:
    """One-axis twisting exp(-i tau J_z^2): diagonal phases e^{-i tau m^2}."""
    m = _m_values(state.n_atoms)
    state.amps *= np.exp(-1j * tau * m * m)
    return state


@lru_cache(maxsize=8)
def _tat_eig(n_atoms: int):
    ops = dicke_operators(n_atoms)
    h = ops.jz @ ops.jz - ops.jy @ ops.jy
    w, u = np.linalg.eigh(h)
    return w, u


def tat_evolve(state: DickeVector, tau: float) -> DickeVector:
    """Two-axis twisting exp(-i tau (J_z^2 - J_y^2)) via a cached eigenbasis."""
    w, u = _tat_eig(state.n_atoms)
    state.amps = u @ (np.exp(-1j * tau * w) * (u.conj().T @ state.amps))
    return state


@lru_cache(maxsize=8)
def _jx_eig(n_atoms: int):
    ops = dicke_operators(n_atoms)
    w, u = np.linalg.eigh(ops.jx)
    return w, u


def rotate_x(state: DickeVector, angle: float) -> DickeVector:
    """Global rotation exp(-i angle J_x) on the shell."""
    w, u = _jx_eig(state.n_atoms)
    state.amps = u @ (np.exp(-1j * angle * w) * (u.conj().T @ state.amps))
    return state


def _shift_vectors(amps_rows: np.ndarray, n_atoms: int):
    """w_a = J_a applied to each row of a (batch, N+1) amplitude matrix."""
    a = _raise_coeffs(n_atoms)
    m = _m_values(n_atoms)
    wp = np.zeros_like(amps_rows)
    wm = np.zeros_like(amps_rows)
    wp[:, 1:] = a * amps_rows[:, :-1]
    wm[:, :-1] = a * amps_rows[:, 1:]
    wx = 0.5 * (wp + wm)
    wy = -0.5j * (wp - wm)
    wz = amps_rows * m
    return wx, wy, wz


def collective_expectations(state: DickeVector) -> CollectiveExpectations:
    """Same moment bundle as the full engine, computed on the shell."""
    c = state.amps[None, :]
    wx, wy, wz = _shift_vectors(c, state.n_atoms)
    ws = (wx[0], wy[0], wz[0])
    psi = state.amps
    means = np.array([np.vdot(psi, w).real for w in ws])
    cov = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            cov[a, b] = cov[b, a] = np.vdot(ws[a], ws[b]).real - means[a] * means[b]
    j2 = float(sum(np.vdot(w, w).real for w in ws))
    return CollectiveExpectations(means[0], means[1], means[2], cov, j2)


def xi2(state: DickeVector) -> float:
    """Squeezing parameter on the shell."""
    e = collective_expectations(state)
    return xi2_from_moments(state.n_atoms, e.bloch, e.cov)


def _oat_xi2_batch(n_atoms: int, taus: np.ndarray) -> np.ndarray:
    """xi^2 after one-axis twisting of the coherent x state, vectorized.

    Under twisting from the coherent x state the Bloch vector stays on the
    x axis (x parity), so the perpendicular covariance block is the (y, z)
    block and the minimal variance has a closed form.
    """
    c0 = coherent_x(n_atoms).amps
    m = _m_values(n_atoms)
    out = np.empty(len(taus))
    chunk = max(1, (1 << 22) // (n_atoms + 1))
    for start in range(0, len(taus), chunk):
        t = taus[start : start + chunk]
        rows = c0 * np.exp(-1j * np.outer(t, m * m))
        wx, wy, wz = _shift_vectors(rows, n_atoms)
        conj = rows.conj()
        jx = np.einsum("bk,bk->b", conj, wx).real
        var_y = np.einsum("bk,bk->b", wy.conj(), wy).real
        var_z = np.einsum("bk,bk->b", wz.conj(), wz).real
        cov_yz = np.einsum("bk,bk->b", wy.conj(), wz).real
        half_tr = 0.5 * (var_y + var_z)
        radius = np.sqrt(0.25 * (var_y - var_z) ** 2 + cov_yz**2)
        out[start : start + len(t)] = n_atoms * (half_tr - radius) / jx**2
    return out


def oat_optimal_xi2(n_atoms: int) -> dict:
    """Best one-axis-twisting squeezing: dense scan plus golden refinement.

    Scans tau in [0, pi] on 10^5 points, then refines the bracketed
    minimum to ~1e-10.  Returns {"tau": tau_star, "xi2": xi2_star}.
    """
    if n_atoms < 2:
        raise InvalidArgumentError("need at least two atoms to squeeze")
    taus = np.linspace(0.0, np.pi, 100_001)[1:]
    values = _oat_xi2_batch(n_atoms, taus)
    i = int(np.argmin(values))
    lo = taus[max(i - 1, 0)]
    hi = taus[min(i + 1, len(taus) - 1)]
    res = minimize_scalar(
        lambda t: float(_oat_xi2_batch(n_atoms, np.array([t]))[0]),
        bracket=(lo, taus[i], hi),
        method="golden",
        options={"xtol": 1e-10},
    )
    return {"tau": float(res.x), "xi2": float(res.fun)}


def trial_state(n_atoms: int) -> DickeVector:
    """Three-amplitude reference state with analytic squeezing 4/(N+2).

    (1/sqrt(2))|m=0> + (1/2)(|m=+1> + |m=-1>), defined for even N.
    """
    if n_atoms % 2 != 0:
        raise InvalidArgumentError("trial state needs even N (integer m)")
    amps = np.zeros(n_atoms + 1, dtype=np.complex128)
    mid = n_atoms // 2
    amps[mid] = 1.0 / np.sqrt(2.0)
    amps[mid + 1] = 0.5
    amps[mid - 1] = 0.5
    return DickeVector(amps, n_atoms)


def squeezing_limit(n_atoms: int) -> float:
    """Fundamental squeezing floor 2/(N+2)."""
    if n_atoms < 1:
        raise InvalidArgumentError("n_atoms must be >= 1")
    return 2.0 / (n_atoms + 2.0)


def _pairs(params) -> np.ndarray:
    values = np.asarray(getattr(params, "values", params), dtype=float).ravel()
    if len(values) % 2 != 0:
        raise InvalidArgumentError("simplified-circuit parameters come in (tau, theta) pairs")
    return values.reshape(-1, 2)


def simplified_circuit(state: DickeVector, params) -> DickeVector:
    """Alternating twisting phases and x rotations: prod_i R_x(theta_i) T(tau_i).

    ``params`` is a flat array [tau_1, theta_1, tau_2, ...] or a sequence
    of (tau, theta) pairs.
    """
    for tau, theta in _pairs(params):
        oat_evolve(state, tau)
        rotate_x(state, theta)
    return state


@lru_cache(maxsize=8)
def _embed_tables(n_atoms: int):
    b = np.arange(1 << n_atoms, dtype=np.uint64)
    pc = np.bitwise_count(b).astype(np.int64)
    k = np.arange(n_atoms + 1, dtype=float)
    log_binom = gammaln(n_atoms + 1.0) - gammaln(k + 1.0) - gammaln(n_atoms - k + 1.0)
    return pc, np.exp(-0.5 * log_binom)


def embed_to_full(state: DickeVector) -> statevec.StateVector:
    """Expand each |m> into the uniform symmetric superposition of bitstrings."""
    n = state.n_atoms
    if n > statevec.get_cap():
        raise CapacityError(f"N={n} exceeds the state-vector cap")
    pc, inv_sqrt_binom = _embed_tables(n)
    amps = (state.amps * inv_sqrt_binom)[pc]
    return statevec.StateVector(amps, n)
