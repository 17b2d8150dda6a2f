"""
Control-dressed GKLS generator and its piecewise-exponential integration.

For a noise channel ``(A, lam)`` the dissipator at grid point ``t_k`` is::

    lam * sum_j eta_j**2 * gamma(omega_j) * D[F_j]

with ``eta_j = |Tr(F_j^+ A)|`` and ``D[F]`` the standard Lindblad
superoperator. All ``N**2`` ordered pairs are summed once: conjugate pairs
appear as two separate channels (one emission, one absorption) and the
diagonal channels sit at zero frequency.
"""

from dataclasses import dataclass

import numpy as np

from .bath import rate_gamma
from .linalg import commutator_superop, dagger, expm, is_hermitian, ordered_products

__all__ = [
    "IntegrationError",
    "NoiseChannel",
    "LiouvillianTrack",
    "channel_overlap",
    "channel_overlaps",
    "channel_rates",
    "weighted_dissipator",
    "build_liouvillian",
    "evolve_master",
    "check_states",
]


class IntegrationError(RuntimeError):
    """A propagated state left the set of density matrices."""


@dataclass(frozen=True)
class NoiseChannel:
    a_op: np.ndarray
    lam: float

    def __post_init__(self):
        a = np.asarray(self.a_op, dtype=complex)
        if not is_hermitian(a):
            raise ValueError("noise coupling operator must be Hermitian")
        if self.lam < 0:
            raise ValueError(f"coupling strength must be nonnegative, got {self.lam}")
        object.__setattr__(self, "a_op", a)


@dataclass
class LiouvillianTrack:
    """``generators[k]`` acts on ``[t_k, t_k+1]``; ``dissipators[k]`` at ``t_k``."""

    generators: np.ndarray
    dissipators: np.ndarray


def channel_overlap(f, a_op):
    """``|Tr(F^+ A)|`` for a single channel operator."""
    f = np.asarray(f)
    a_op = np.asarray(a_op)
    if f.shape != a_op.shape:
        raise ValueError(f"shape mismatch {f.shape} vs {a_op.shape}")
    return float(abs(np.trace(dagger(f) @ a_op)))


def channel_overlaps(table, a_op):
    """``eta[k, n, m] = |<u_n|A|u_m>|`` for every channel of the table."""
    v = table.vecs
    return np.abs(dagger(v) @ a_op @ v)


def channel_rates(table, bath):
    return rate_gamma(table.omega, bath)


def weighted_dissipator(vecs, weights):
    """``sum_{n,m} w[k,n,m] D[|u_n><u_m|]`` as a stack of superoperators.

    Uses ``vec(|u_n><u_n|) = u_n (x) u_n*`` so the jump part collapses to
    ``E w E^+`` and the anticommutator part to a single diagonal operator.
    """
    k, n, _ = vecs.shape
    e = (vecs[:, :, None, :] * np.conj(vecs)[:, None, :, :]).reshape(k, n * n, n)
    jump = e @ weights @ dagger(e)
    q = (vecs * weights.sum(axis=1)[:, None, :]) @ dagger(vecs)
    eye = np.eye(n)
    anti = np.einsum("kij,ab->kiajb", q, eye) + np.einsum("ij,kba->kiajb", eye, q)
    return jump - 0.5 * anti.reshape(k, n * n, n * n)


def build_liouvillian(track, table, noise, bath):
    """Vectorized generators for every time step.

    The coherent part uses the midpoint Hamiltonian of each step (the same
    one that built ``U``); the dissipative part is the mean of the two
    endpoint dissipators.
    """
    if track.hamiltonians.shape[0] + 1 != table.vecs.shape[0]:
        raise ValueError("channel table and propagator track are on different grids")
    if noise.a_op.shape != track.hamiltonians.shape[1:]:
        raise ValueError("noise operator dimension does not match the system")
    eta = channel_overlaps(table, noise.a_op)
    weights = noise.lam * eta**2 * channel_rates(table, bath)
    diss = weighted_dissipator(table.vecs, weights)
    gen = commutator_superop(track.hamiltonians) + 0.5 * (diss[:-1] + diss[1:])
    return LiouvillianTrack(generators=gen, dissipators=diss)


def check_states(states, herm_tol=1e-9, trace_tol=1e-9, eig_tol=1e-7):
    """Raise :class:`IntegrationError` if any matrix in the stack is invalid."""
    herm = np.max(np.abs(states - dagger(states)), initial=0.0)
    trace = np.max(np.abs(np.trace(states, axis1=-2, axis2=-1) - 1), initial=0.0)
    herm_part = 0.5 * (states + dagger(states))
    min_eig = np.min(np.linalg.eigvalsh(herm_part), initial=np.inf)
    if herm >= herm_tol or trace >= trace_tol or min_eig <= -eig_tol:
        raise IntegrationError(
            f"density matrix invariants violated (hermiticity {herm:.2e}, trace {trace:.2e}, "
            f"min eigenvalue {min_eig:.2e}); reduce dt"
        )


def evolve_master(rho0, ltrack, grid, check=True):
    """Propagate one density matrix or a stack of them.

    Returns an array of shape ``(n_steps + 1,) + rho0.shape`` holding the
    state at every grid point.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    single = rho0.ndim == 2
    stack = rho0[None] if single else rho0
    n = stack.shape[-1]
    if ltrack.generators.shape[0] != grid.n_steps:
        raise ValueError("Liouvillian track does not match the time grid")
    maps = ordered_products(expm(ltrack.generators * grid.dt))
    vecs = stack.reshape(stack.shape[0], n * n).T
    states = (maps @ vecs).transpose(0, 2, 1).reshape((grid.n_steps + 1,) + stack.shape)
    if check:
        check_states(states)
    return states[:, 0] if single else states
