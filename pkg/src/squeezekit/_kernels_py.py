"""Pure-numpy fallbacks for the compiled kernels.

Signatures mirror ``_speedups`` exactly so ``kernels`` can swap modules.
"""
import numpy as np


def apply_single_qubit(amps, n_atoms, k, u00, u01, u10, u11):
    view = amps.reshape(-1, 2, 1 << k)
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :]
    view[:, 0, :] = u00 * a0 + u01 * a1
    view[:, 1, :] = u10 * a0 + u11 * a1


def phase_mul(amps, energies, c):
    amps *= np.exp(1j * c * energies)


def accumulate_jx(amps, out, n_atoms):
    for k in range(n_atoms):
        v = amps.reshape(-1, 2, 1 << k)
        o = out.reshape(-1, 2, 1 << k)
        o[:, 0, :] += 0.5 * v[:, 1, :]
        o[:, 1, :] += 0.5 * v[:, 0, :]


def accumulate_jy(amps, out, n_atoms):
    for k in range(n_atoms):
        v = amps.reshape(-1, 2, 1 << k)
        o = out.reshape(-1, 2, 1 << k)
        o[:, 0, :] += 0.5j * v[:, 1, :]
        o[:, 1, :] += -0.5j * v[:, 0, :]
