"""
Coupling-agnostic noise sensitivity ``D_eff``.

``D_eff`` is the Frobenius norm of the time integral of the rate-weighted
channel superoperators, each taken in the interaction frame of the
noise-free propagator. No coupling operator enters: the channel overlaps
are bounded by ``Tr(A^+ A)``, which depends only on the noise, not on the
controls, and is left out.
"""

from dataclasses import dataclass, field

import numpy as np

from .bath import rate_gamma
from .dynamics import dressed_dynamics
from .lindblad import NoiseChannel, build_liouvillian, weighted_dissipator
from .linalg import dagger, expm, frobenius_norm, ordered_products, unitary_superop

__all__ = [
    "SensitivityReport",
    "BoundCheck",
    "interaction_frame_channel",
    "compute_d_eff",
    "error_propagator",
    "verify_first_order_bound",
]


@dataclass
class SensitivityReport:
    d_eff: float
    f_matrices: list
    integrand_norms: np.ndarray = field(repr=False, default=None)

    @property
    def f_matrix(self):
        return self.f_matrices[0]


@dataclass
class BoundCheck:
    lhs: float
    rhs: float
    d_eff: float
    coupling_norm: float
    delta_lambda: float

    @property
    def holds(self):
        return self.lhs <= self.rhs

    @property
    def slack(self):
        return self.lhs / self.rhs if self.rhs > 0 else float("nan")


def interaction_frame_channel(u_super, f_super):
    """``U^+ F U`` for superoperators (stacks broadcast)."""
    u_super = np.asarray(u_super)
    f_super = np.asarray(f_super)
    if u_super.shape[-2:] != f_super.shape[-2:]:
        raise ValueError(f"superoperator shapes differ: {u_super.shape} vs {f_super.shape}")
    return dagger(u_super) @ f_super @ u_super


def compute_d_eff(table, track, bath, grid, per_step=False):
    """Sensitivity of a control solution to first order in the coupling.

    The integrand at ``t_k`` is ``sum_j gamma(omega_j) U_k^+ D[F_j] U_k`` and
    the time integral is the trapezoid rule on the propagation grid.

    Each ``F_j`` is an eigenoperator of ``U_k``'s adjoint action, so the
    frame change only multiplies it by a phase, which cancels in ``D[F_j]``.
    The integral is therefore accumulated directly from the eigenvectors
    without building per-step superoperators; ``per_step=True`` builds them
    anyway (through :func:`interaction_frame_channel`) to report the
    integrand norms.
    """
    if table.vecs.shape[0] != grid.n_steps + 1:
        raise ValueError("channel table does not match the time grid")
    gamma = rate_gamma(table.omega, bath) * grid.trapezoid_weights()[:, None, None]
    f_matrix = _integrated_dissipator(table.vecs, gamma)
    norms = None
    if per_step:
        channel_sum = weighted_dissipator(table.vecs, rate_gamma(table.omega, bath))
        integrand = interaction_frame_channel(unitary_superop(track.unitaries), channel_sum)
        norms = np.sqrt(np.sum(np.abs(integrand) ** 2, axis=(1, 2)))
    return SensitivityReport(d_eff=frobenius_norm(f_matrix), f_matrices=[f_matrix], integrand_norms=norms)


def _integrated_dissipator(vecs, weights):
    """``sum_k sum_{n,m} w[k,n,m] D[|u_n(t_k)><u_m(t_k)|]`` as one superoperator."""
    k, n, _ = vecs.shape
    e = (vecs[:, :, None, :] * np.conj(vecs)[:, None, :, :]).reshape(k, n * n, n)
    jump = ((e @ weights) @ dagger(e)).sum(axis=0)
    q = ((vecs * weights.sum(axis=1)[:, None, :]) @ dagger(vecs)).sum(axis=0)
    eye = np.eye(n)
    return jump - 0.5 * (np.kron(q, eye) + np.kron(eye, q.T))


def error_propagator(track, table, noise, bath, grid):
    """``U_err(tau) = U^+(tau) V(tau)`` for the full noisy evolution."""
    ltrack = build_liouvillian(track, table, noise, bath)
    v = ordered_products(expm(ltrack.generators * grid.dt))[-1]
    u = unitary_superop(track.unitaries[-1])
    return dagger(u) @ v


def verify_first_order_bound(system, pulses, noise, bath, grid, delta_lambda=1e-4):
    """Compare the finite-difference first-order error with its bound.

    The left side is ``||(U_err(dl) - U_err(0)) / dl||`` with the coupling
    operator of `noise` (its own ``lam`` is ignored); the right side is
    ``Tr(A^+ A) * D_eff``.
    """
    if not 0 < delta_lambda <= 1e-3:
        raise ValueError("delta_lambda must be in (0, 1e-3]")
    track, table = dressed_dynamics(system, pulses, grid)
    a_op = noise.a_op
    at_zero = error_propagator(track, table, NoiseChannel(a_op, 0.0), bath, grid)
    at_dl = error_propagator(track, table, NoiseChannel(a_op, delta_lambda), bath, grid)
    change = at_dl - at_zero
    # an exactly zero change is legitimate (no active channel); a tiny one is noise
    if 0 < frobenius_norm(change) < 1e3 * np.finfo(float).eps * frobenius_norm(at_zero):
        raise ValueError("error propagator change is at round-off level; increase delta_lambda")
    lhs = frobenius_norm(change / delta_lambda)
    d_eff = compute_d_eff(table, track, bath, grid).d_eff
    coupling_norm = float(np.trace(dagger(a_op) @ a_op).real)
    return BoundCheck(
        lhs=lhs, rhs=coupling_norm * d_eff, d_eff=d_eff, coupling_norm=coupling_norm, delta_lambda=delta_lambda
    )
