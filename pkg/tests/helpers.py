import numpy as np

from robustqoc.dynamics import ControlSystem, TimeGrid
from robustqoc.linalg import PAULI_X, PAULI_Y, PAULI_Z

DELTA = 3e-3


def random_matrix(rng, n):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


def random_hermitian(rng, n):
    m = random_matrix(rng, n)
    return (m + m.conj().T) / 2


def random_unitary(rng, n):
    q, r = np.linalg.qr(random_matrix(rng, n))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng, n, rank=None):
    m = rng.normal(size=(n, rank or n)) + 1j * rng.normal(size=(n, rank or n))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real


def random_pure(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def qubit_system(delta=DELTA):
    return ControlSystem(delta / 2 * PAULI_Z, (PAULI_X / 2, PAULI_Y / 2))


def smooth_pulses(grid, amp=4e-3, n_lines=2):
    """Smooth nontrivial amplitudes on the midpoints of `grid`."""
    t = grid.midpoints / grid.tau
    lines = [amp * np.sin(np.pi * t) * (1 + 0.5 * np.cos(3 * np.pi * t)), 0.6 * amp * np.sin(2 * np.pi * t) ** 2]
    return np.array(lines[:n_lines])


def driven_grid(n_steps=500, tau=1000.0):
    return TimeGrid(tau, n_steps)
