"""Exact 2^N state-vector engine for collective-spin circuits.

Conventions, fixed once and used everywhere:

* Basis index b encodes spin k in bit k (little endian).  Bit value 1 is
  spin up along z, so index 0 is the all-down product state.
* Spin operators are s = sigma/2 with hbar = 1; collective J_a = sum_k
  s_a^(k).  A rotation about axis a by angle t applies exp(-i t J_a).
  With this sign the pulse that takes |down_z>^N to |up_x>^N is a
  y rotation by -pi/2 (equivalently 3pi/2 up to a global phase).
* Interaction gates are diagonal in the z (or rotated x) product basis
  with per-basis-state energies sum_{i<j} V_ij z_i z_j / 4, z_k = +-1.

Gates mutate the amplitude array in place and also return the state so
calls can be chained.  Global phases are never compared directly; use
``StateVector.fidelity``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import (
    CapacityError,
    DegenerateBlochVectorError,
    InvalidArgumentError,
)
from .lattice import InteractionMatrix

__all__ = [
    "StateVector",
    "ParamVector",
    "default_bounds",
    "get_cap",
    "set_cap",
    "init_down_z",
    "init_coherent_x",
    "apply_rotation",
    "apply_dz",
    "apply_dx",
    "apply_layer",
    "apply_circuit",
    "apply_bare_sequence",
    "collective_expectations",
    "CollectiveExpectations",
    "xi2_from_moments",
    "xi2_exact",
]

_N_CAP = 20


def get_cap() -> int:
    return _N_CAP


def set_cap(n: int) -> None:
    """Raise or lower the register-size cap (default 20, i.e. 16 MB)."""
    global _N_CAP
    if n < 1:
        raise InvalidArgumentError("cap must be >= 1")
    _N_CAP = int(n)


class StateVector:
    """2^N complex amplitudes of the full spin register."""

    __slots__ = ("amps", "n_atoms")

    def __init__(self, amps: np.ndarray, n_atoms: int):
        amps = np.ascontiguousarray(amps, dtype=np.complex128)
        if amps.shape != (1 << n_atoms,):
            raise InvalidArgumentError("amplitude array must have length 2^N")
        self.amps = amps
        self.n_atoms = n_atoms

    def copy(self) -> "StateVector":
        return StateVector(self.amps.copy(), self.n_atoms)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def fidelity(self, other: "StateVector") -> float:
        """|<self|other>|, insensitive to global phase."""
        return float(abs(np.vdot(self.amps, other.amps)))

    def dump(self, path) -> None:
        """Raw little-endian interleaved (re, im) doubles, for debugging."""
        self.amps.astype("<c16").tofile(path)


def _check_capacity(n_atoms: int) -> None:
    if not 1 <= n_atoms <= _N_CAP:
        raise CapacityError(
            f"N={n_atoms} outside supported range 1..{_N_CAP} "
            "(raise with set_cap if you have the memory)"
        )


def init_down_z(n_atoms: int) -> StateVector:
    """Product state with every spin down along z."""
    _check_capacity(n_atoms)
    amps = np.zeros(1 << n_atoms, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(amps, n_atoms)


def init_coherent_x(n_atoms: int) -> StateVector:
    """Coherent spin state along +x: every spin in (|down>+|up>)/sqrt(2).

    Equal to R_y(-pi/2)|down_z>^N; <J_x> = N/2, <J_y> = <J_z> = 0 and the
    squeezing parameter is exactly 1.
    """
    _check_capacity(n_atoms)
    amps = np.full(1 << n_atoms, 2.0 ** (-n_atoms / 2.0), dtype=np.complex128)
    return StateVector(amps, n_atoms)


def _rotation_2x2(axis: str, angle: float):
    """Single-spin exp(-i angle s_axis) in the (down, up) ordering."""
    c = np.cos(angle / 2.0)
    s = np.sin(angle / 2.0)
    if axis == "x":
        return (c, -1j * s, -1j * s, c)
    if axis == "y":
        return (c, s, -s, c)
    if axis == "z":
        return (c + 1j * s, 0.0, 0.0, c - 1j * s)
    raise InvalidArgumentError(f"unknown axis {axis!r}")


@lru_cache(maxsize=8)
def _m_table(n_atoms: int) -> np.ndarray:
    """J_z eigenvalue (popcount - N/2) per basis index."""
    b = np.arange(1 << n_atoms, dtype=np.uint64)
    return np.bitwise_count(b).astype(np.float64) - n_atoms / 2.0


def apply_rotation(state: StateVector, axis: str, angle: float) -> StateVector:
    """Global rotation exp(-i angle J_axis), the same 2x2 on every spin."""
    if axis == "z":
        # Diagonal: one phase pass instead of N sub-gate passes.
        kernels.phase_mul(state.amps, _m_table(state.n_atoms), -angle)
        return state
    u = _rotation_2x2(axis, angle)
    for k in range(state.n_atoms):
        kernels.apply_single_qubit(state.amps, state.n_atoms, k, *u)
    return state


@lru_cache(maxsize=16)
def _pair_energy_table(v_bytes: bytes, n_atoms: int) -> np.ndarray:
    """E(b) = sum_{i<j} V_ij z_i z_j / 4 for every basis index, cached per V."""
    v = np.frombuffer(v_bytes, dtype=np.float64).reshape(n_atoms, n_atoms)
    dim = 1 << n_atoms
    out = np.empty(dim)
    bits = np.arange(n_atoms, dtype=np.uint32)
    chunk = min(dim, 1 << 16)
    for start in range(0, dim, chunk):
        idx = np.arange(start, min(start + chunk, dim), dtype=np.uint32)
        z = (((idx[:, None] >> bits) & 1).astype(np.float64)) * 2.0 - 1.0
        out[start : start + len(idx)] = ((z @ v) * z).sum(axis=1) / 8.0
    return out


@lru_cache(maxsize=16)
def _site_energy_table(delta_bytes: bytes, n_atoms: int) -> np.ndarray:
    """E(b) = sum_i delta_i z_i / 2 for every basis index."""
    delta = np.frombuffer(delta_bytes, dtype=np.float64)
    dim = 1 << n_atoms
    out = np.empty(dim)
    bits = np.arange(n_atoms, dtype=np.uint32)
    chunk = min(dim, 1 << 16)
    for start in range(0, dim, chunk):
        idx = np.arange(start, min(start + chunk, dim), dtype=np.uint32)
        z = (((idx[:, None] >> bits) & 1).astype(np.float64)) * 2.0 - 1.0
        out[start : start + len(idx)] = (z @ delta) / 2.0
    return out


def pair_energies(V: InteractionMatrix, n_atoms: int) -> np.ndarray:
    """Cached diagonal of sum_{i<j} V_ij s_i^z s_j^z over the z basis."""
    if V.n_atoms != n_atoms:
        raise InvalidArgumentError("interaction matrix does not match register size")
    return _pair_energy_table(V.V.tobytes(), n_atoms)


def _full_energies(V: InteractionMatrix, n_atoms: int) -> np.ndarray:
    """Pair energies plus on-site light shifts (bare-pulse Hamiltonian)."""
    e = pair_energies(V, n_atoms)
    if np.any(V.onsite != 0.0):
        e = e + _site_energy_table(V.onsite.tobytes(), n_atoms)
    return e


def apply_dz(state: StateVector, V: InteractionMatrix, tau: float) -> StateVector:
    """Finite-range zz gate exp(-i tau sum_{i<j} V_ij s_i^z s_j^z)."""
    kernels.phase_mul(state.amps, pair_energies(V, state.n_atoms), -tau)
    return state


def apply_dx(state: StateVector, V: InteractionMatrix, tau: float) -> StateVector:
    """Finite-range xx gate, the z gate conjugated into the x basis.

    Equals R_y(pi/2) D_z(tau) R_y(-pi/2): rotate so x maps to z, apply the
    diagonal phases, rotate back.
    """
    apply_rotation(state, "y", -np.pi / 2.0)
    kernels.phase_mul(state.amps, pair_energies(V, state.n_atoms), -tau)
    apply_rotation(state, "y", np.pi / 2.0)
    return state


def apply_layer(
    state: StateVector, V: InteractionMatrix, tau: float, theta: float, tau_p: float
) -> StateVector:
    """One variational layer D_x(tau_p) R_x(theta) D_z(tau), in that order."""
    apply_dz(state, V, tau)
    apply_rotation(state, "x", theta)
    apply_dx(state, V, tau_p)
    return state


@dataclass
class ParamVector:
    """Circuit parameters, 3 per layer: (tau_i, theta_i, tau_p_i) flattened.

    Bounds default to tau, tau_p in [0, 10/v0] and theta in [0, 2*pi];
    the optimum total interaction time sits at a few 1/v0, so 10/v0 per
    gate is generous without being unbounded.
    """

    values: np.ndarray
    bounds: np.ndarray = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.values) % 3 != 0:
            raise InvalidArgumentError("parameter vector length must be 3*n_layers")
        if self.bounds is None:
            self.bounds = default_bounds(self.n_layers)
        self.bounds = np.asarray(self.bounds, dtype=float)
        if self.bounds.shape != (len(self.values), 2):
            raise InvalidArgumentError("bounds must be (3*n_layers, 2)")

    @property
    def n_layers(self) -> int:
        return len(self.values) // 3

    def layers(self):
        for i in range(self.n_layers):
            yield tuple(self.values[3 * i : 3 * i + 3])


def default_bounds(n_layers: int, v0: float = 1.0) -> np.ndarray:
    one = np.array([[0.0, 10.0 / v0], [0.0, 2.0 * np.pi], [0.0, 10.0 / v0]])
    return np.tile(one, (n_layers, 1))


def _param_values(params) -> np.ndarray:
    values = np.asarray(getattr(params, "values", params), dtype=float)
    if values.ndim != 1 or len(values) % 3 != 0:
        raise InvalidArgumentError("parameter vector length must be 3*n_layers")
    return values


def apply_circuit(state: StateVector, V: InteractionMatrix, params) -> StateVector:
    """Layered circuit U_n ... U_1; ``params`` is a ParamVector or flat array."""
    values = _param_values(params)
    for i in range(len(values) // 3):
        apply_layer(state, V, values[3 * i], values[3 * i + 1], values[3 * i + 2])
    return state


def apply_bare_sequence(
    state: StateVector, V: InteractionMatrix, params, noise=None
) -> StateVector:
    """The 9n+1 global pulses that realize the circuit on hardware.

    Starting from the supplied state (normally all spins down), applies the
    coherent-state preparation pulse and then, per layer, the nine-pulse
    decomposition: two half-time evolutions under the full interaction
    Hamiltonian (pair couplings plus on-site shifts) sandwiching an x pi
    pulse (spin echo), the variational x rotation, and the x-basis analogue
    built from y rotations.  The echo cancels the on-site shifts exactly,
    so with unit noise multipliers the result equals the ideal circuit on
    the coherent state up to a global phase.

    ``noise``: optional array of 9n+1 multiplicative factors, one per pulse
    in chronological order, scaling interaction durations and rotation
    angles alike.
    """
    values = _param_values(params)
    n_layers = len(values) // 3
    n_pulses = 9 * n_layers + 1
    if noise is None:
        noise = np.ones(n_pulses)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (n_pulses,):
        raise InvalidArgumentError(f"noise multipliers must have length {n_pulses}")

    energies = _full_energies(V, state.n_atoms)
    amps = state.amps

    def pulse_phase(duration):
        kernels.phase_mul(amps, energies, -duration)

    apply_rotation(state, "y", -np.pi / 2.0 * noise[0])
    p = 1
    for i in range(n_layers):
        tau, theta, tau_p = values[3 * i : 3 * i + 3]
        pulse_phase(tau / 2.0 * noise[p])
        apply_rotation(state, "x", np.pi * noise[p + 1])
        pulse_phase(tau / 2.0 * noise[p + 2])
        apply_rotation(state, "x", theta * noise[p + 3])
        apply_rotation(state, "y", np.pi / 2.0 * noise[p + 4])
        pulse_phase(tau_p / 2.0 * noise[p + 5])
        apply_rotation(state, "y", np.pi * noise[p + 6])
        pulse_phase(tau_p / 2.0 * noise[p + 7])
        apply_rotation(state, "y", np.pi / 2.0 * noise[p + 8])
        p += 9
    return state


@dataclass
class CollectiveExpectations:
    """First and second moments of (J_x, J_y, J_z) plus <J^2>."""

    jx: float
    jy: float
    jz: float
    cov: np.ndarray
    j2: float

    @property
    def bloch(self) -> np.ndarray:
        return np.array([self.jx, self.jy, self.jz])


def _collective_vectors(state: StateVector):
    """w_a = J_a |psi> for a = x, y, z."""
    n = state.n_atoms
    wx = np.zeros_like(state.amps)
    wy = np.zeros_like(state.amps)
    kernels.accumulate_jx(state.amps, wx, n)
    kernels.accumulate_jy(state.amps, wy, n)
    wz = state.amps * _m_table(n)
    return wx, wy, wz


def collective_expectations(state: StateVector) -> CollectiveExpectations:
    """Exact <J_a>, symmetrized covariance and <J^2> from the amplitudes."""
    ws = _collective_vectors(state)
    psi = state.amps
    means = np.array([np.vdot(psi, w).real for w in ws])
    cov = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            # Re<w_a|w_b> = <(J_a J_b + J_b J_a)/2>
            cov[a, b] = cov[b, a] = np.vdot(ws[a], ws[b]).real - means[a] * means[b]
    j2 = float(sum(np.vdot(w, w).real for w in ws))
    return CollectiveExpectations(means[0], means[1], means[2], cov, j2)


def xi2_from_moments(n_atoms: int, bloch: np.ndarray, cov: np.ndarray) -> float:
    """Squeezing parameter N * min Var(J_perp) / |<J>|^2.

    The minimal variance over unit directions orthogonal to the Bloch
    vector is the smaller eigenvalue of the 2x2 covariance block in that
    plane (closed form).
    """
    b = np.asarray(bloch, dtype=float)
    norm_b = np.linalg.norm(b)
    if norm_b < 1e-12:
        raise DegenerateBlochVectorError("|<J>| is numerically zero")
    unit = b / norm_b
    helper = np.array([0.0, 0.0, 1.0])
    if abs(unit @ helper) > 0.9:
        helper = np.array([1.0, 0.0, 0.0])
    e1 = np.cross(unit, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(unit, e1)
    m11 = e1 @ cov @ e1
    m22 = e2 @ cov @ e2
    m12 = e1 @ cov @ e2
    half_tr = 0.5 * (m11 + m22)
    radius = np.sqrt(max(0.25 * (m11 - m22) ** 2 + m12**2, 0.0))
    lam_min = half_tr - radius
    return float(n_atoms * lam_min / norm_b**2)


def xi2_exact(state: StateVector) -> float:
    """Squeezing parameter of the state; 1 for any coherent product state."""
    e = collective_expectations(state)
    return xi2_from_moments(state.n_atoms, e.bloch, e.cov)
