# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the hot loops of the state-vector engine.

The numpy fallbacks with identical signatures live in ``_kernels_py``;
``kernels`` picks one of the two at import time.
"""
from libc.math cimport cos, sin


def apply_single_qubit(double complex[::1] amps, int n_atoms, int k,
                       double complex u00, double complex u01,
                       double complex u10, double complex u11):
    """In-place 2x2 gate on spin k (bit k of the basis index, little endian).

    Matrix element ordering: index 0 = bit value 0 (spin down along z),
    index 1 = bit value 1 (spin up).
    """
    cdef Py_ssize_t stride = (<Py_ssize_t>1) << k
    cdef Py_ssize_t block = stride << 1
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n_atoms
    cdef Py_ssize_t base, i
    cdef double complex a0, a1
    for base in range(0, dim, block):
        for i in range(base, base + stride):
            a0 = amps[i]
            a1 = amps[i + stride]
            amps[i] = u00 * a0 + u01 * a1
            amps[i + stride] = u10 * a0 + u11 * a1


def phase_mul(double complex[::1] amps, const double[::1] energies, double c):
    """In-place amps[i] *= exp(1j * c * energies[i])."""
    cdef Py_ssize_t i, dim = amps.shape[0]
    cdef double ph
    cdef double complex f
    for i in range(dim):
        ph = c * energies[i]
        f.real = cos(ph)
        f.imag = sin(ph)
        amps[i] = amps[i] * f


def accumulate_jx(const double complex[::1] amps, double complex[::1] out,
                  int n_atoms):
    """out += J_x amps, with J_x = sum_k sigma_x^(k) / 2."""
    cdef Py_ssize_t k, stride, block, base, i
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n_atoms
    for k in range(n_atoms):
        stride = (<Py_ssize_t>1) << k
        block = stride << 1
        for base in range(0, dim, block):
            for i in range(base, base + stride):
                out[i] = out[i] + 0.5 * amps[i + stride]
                out[i + stride] = out[i + stride] + 0.5 * amps[i]


def accumulate_jy(const double complex[::1] amps, double complex[::1] out,
                  int n_atoms):
    """out += J_y amps, with J_y = sum_k sigma_y^(k) / 2.

    In the (down, up) ordering sigma_y maps (a0, a1) -> (1j*a1, -1j*a0).
    """
    cdef Py_ssize_t k, stride, block, base, i
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n_atoms
    cdef double complex half_j = 0.5j
    for k in range(n_atoms):
        stride = (<Py_ssize_t>1) << k
        block = stride << 1
        for base in range(0, dim, block):
            for i in range(base, base + stride):
                out[i] = out[i] + half_j * amps[i + stride]
                out[i + stride] = out[i + stride] - half_j * amps[i]
