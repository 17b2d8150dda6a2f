"""
Noise-free propagation and the control-dressed jump channels.

The propagator ``U(t)`` is built on a uniform grid with midpoint-sampled
controls. Its eigenvectors ``|u_n(t)>`` (with ``U|u_n> = exp(-i eps_n)|u_n>``)
are tracked continuously in time, the eigenphases are unwrapped, and every
ordered pair ``(n, m)`` defines a channel ``F = |u_n><u_m|`` with phase
``phi = eps_n - eps_m`` and Bohr frequency ``omega = d phi / dt``.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import dagger, is_hermitian, ordered_products

__all__ = [
    "GridAccuracyError",
    "DegeneracyWarning",
    "TimeGrid",
    "ControlSystem",
    "PropagatorTrack",
    "JumpChannelTable",
    "sample_controls",
    "propagate_unitary",
    "track_eigensystem",
    "build_jump_channels",
    "dressed_dynamics",
]

log = logging.getLogger(__name__)

# propagation-step accuracy guard: dt * max ||H|| must stay below this
MAX_PHASE_STEP = 0.5
TIE_TOL = 1e-6


class GridAccuracyError(ValueError):
    pass


class DegeneracyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TimeGrid:
    tau: float
    n_steps: int = 500

    def __post_init__(self):
        if self.tau <= 0 or self.n_steps < 1:
            raise ValueError(f"need tau > 0 and n_steps >= 1, got {self.tau}, {self.n_steps}")

    @property
    def dt(self):
        return self.tau / self.n_steps

    @property
    def times(self):
        """The ``n_steps + 1`` grid points ``t_k``."""
        return np.linspace(0.0, self.tau, self.n_steps + 1)

    @property
    def midpoints(self):
        return (np.arange(self.n_steps) + 0.5) * self.dt

    def trapezoid_weights(self):
        w = np.full(self.n_steps + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w


@dataclass(frozen=True)
class ControlSystem:
    """Drift ``h0`` plus control operators; ``H(t) = h0 + sum_i u_i(t) H_i``."""

    h0: np.ndarray
    controls: tuple = ()

    def __post_init__(self):
        h0 = np.asarray(self.h0, dtype=complex)
        ctrls = tuple(np.asarray(h, dtype=complex) for h in self.controls)
        for op in (h0,) + ctrls:
            if op.shape != h0.shape:
                raise ValueError("all operators must share one dimension")
            if not is_hermitian(op):
                raise ValueError("system operators must be Hermitian")
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "controls", ctrls)

    @property
    def dim(self):
        return self.h0.shape[0]

    @property
    def n_controls(self):
        return len(self.controls)

    def hamiltonians(self, amplitudes):
        """Stack of ``H(t)`` for control amplitudes of shape ``(n_controls, n_t)``."""
        amps = np.atleast_2d(np.asarray(amplitudes, dtype=float))
        if amps.shape[0] != self.n_controls:
            raise ValueError(f"expected {self.n_controls} control lines, got {amps.shape[0]}")
        h = np.broadcast_to(self.h0, (amps.shape[1],) + self.h0.shape).copy()
        for amp, op in zip(amps, self.controls):
            h += amp[:, None, None] * op
        return h


@dataclass
class PropagatorTrack:
    """Propagators ``U_k`` on the grid and their tracked eigensystem.

    ``hamiltonians[k]`` is the midpoint Hamiltonian used on ``[t_k, t_k+1]``.
    ``vecs[k][:, n]`` is ``|u_n(t_k)>``.
    """

    unitaries: np.ndarray
    hamiltonians: np.ndarray
    eps: np.ndarray = None
    vecs: np.ndarray = None
    n_ties: int = 0


@dataclass
class JumpChannelTable:
    """Channels for every grid point and ordered pair ``j = (n, m)``.

    Arrays are indexed ``[k, n, m]``; ``ops[k, n, m]`` is the N x N operator
    ``|u_n(t_k)><u_m(t_k)|``.
    """

    vecs: np.ndarray
    phi: np.ndarray
    omega: np.ndarray

    @property
    def ops(self):
        v = self.vecs
        return np.einsum("kin,kjm->knmij", v, np.conj(v))

    @property
    def dim(self):
        return self.vecs.shape[-1]


def sample_controls(pulses, times, n_controls):
    """Control amplitudes at `times` as a ``(n_controls, len(times))`` array.

    `pulses` is either an object with a ``values(times)`` method (a CRAB
    pulse set) or an array already sampled on `times`.
    """
    if hasattr(pulses, "values"):
        amps = pulses.values(times)
    else:
        amps = pulses
    amps = np.asarray(amps, dtype=float)
    if n_controls == 0:
        return np.zeros((0, len(times)))
    amps = amps.reshape(-1, len(times))
    if amps.shape[0] != n_controls:
        raise ValueError(f"pulse set has {amps.shape[0]} lines, system has {n_controls} controls")
    return amps


def propagate_unitary(system, pulses, grid):
    """Piecewise-constant propagator with midpoint-sampled controls.

    Returns a :class:`PropagatorTrack` with ``unitaries`` of shape
    ``(n_steps + 1, N, N)``; the eigensystem is not yet filled in.
    """
    amps = sample_controls(pulses, grid.midpoints, system.n_controls)
    h = system.hamiltonians(amps)
    if system.dim == 2:
        steps, max_norm = _step_exp_2x2(h, grid.dt)
    else:
        # for Hermitian H the max absolute row sum bounds the spectral norm
        max_norm = np.max(np.sum(np.abs(h), axis=-1))
        if grid.dt * max_norm >= MAX_PHASE_STEP:
            max_norm = np.max(np.abs(np.linalg.eigvalsh(h)))
        theta = grid.dt * max_norm
        steps = _step_exp_taylor(h, grid.dt, taylor_order(theta)) if theta < MAX_PHASE_STEP else None
    if grid.dt * max_norm >= MAX_PHASE_STEP:
        raise GridAccuracyError(
            f"dt * max||H|| = {grid.dt * max_norm:.3g} exceeds {MAX_PHASE_STEP}; increase n_steps"
        )
    return PropagatorTrack(unitaries=ordered_products(steps), hamiltonians=h)


def taylor_order(theta, max_order=16):
    """Smallest Taylor order whose truncation bound at ``||x|| = theta`` is below unit roundoff."""
    term = 1.0
    for m in range(1, max_order + 1):
        term *= theta / m
        if term * theta / (m + 1) <= np.finfo(float).eps / 2:
            return m
    return max_order


def _step_exp_taylor(h, dt, order=16):
    """``exp(-i h dt)`` by a Horner-form Taylor series.

    Only used behind the accuracy guard ``||h dt|| < 0.5``, where order 16
    already truncates below 1e-18; smaller steps pass a lower order.
    """
    x = -1j * dt * h
    eye = np.eye(h.shape[-1])
    out = eye + x / order
    for k in range(order - 1, 0, -1):
        out = eye + (x @ out) / k
    return out


def _step_exp_2x2(h, dt):
    """``exp(-i h dt)`` for a stack of 2x2 Hermitian matrices, in closed form."""
    h0 = 0.5 * (h[:, 0, 0] + h[:, 1, 1]).real
    hz = 0.5 * (h[:, 0, 0] - h[:, 1, 1]).real
    off = h[:, 0, 1]
    r = np.sqrt(hz**2 + np.abs(off) ** 2)
    c = np.cos(r * dt)
    # sin(r dt) / r, finite at r = 0
    s = dt * np.sinc(r * dt / np.pi)
    out = np.empty_like(h)
    out[:, 0, 0] = c - 1j * s * hz
    out[:, 1, 1] = c + 1j * s * hz
    out[:, 0, 1] = -1j * s * off
    out[:, 1, 0] = -1j * s * np.conj(off)
    out *= np.exp(-1j * h0 * dt)[:, None, None]
    return out, np.max(np.abs(h0) + r)


def _eigen_unitary(u):
    """Orthonormal eigenvectors and eigenvalues of a stack of unitaries."""
    if u.shape[-1] == 2:
        return _eigen_unitary_2x2(u)
    # The Hermitian combination cos(theta) + a*sin(theta) of the eigenphases
    # shares U's eigenvectors; it is ambiguous only where two eigenphases are
    # mirror images about atan(a), which the residual check below catches.
    herm = 0.5 * (u + dagger(u)) + _MIX * (-0.5j) * (u - dagger(u))
    _, vecs = np.linalg.eigh(herm)
    rot = dagger(vecs) @ u @ vecs
    vals = np.diagonal(rot, axis1=-2, axis2=-1).copy()
    resid = np.max(np.abs(rot - vals[:, :, None] * np.eye(u.shape[-1])), axis=(1, 2))
    bad = resid > 1e-11
    if np.any(bad):
        _, v_bad = np.linalg.eig(u[bad])
        # re-orthonormalize: eig drifts off orthogonality in near-degenerate clusters
        v_bad, _ = np.linalg.qr(v_bad)
        vecs[bad] = v_bad
        vals[bad] = np.einsum("kin,kij,kjn->kn", np.conj(v_bad), u[bad], v_bad)
    return vals, vecs


_MIX = 0.7390851332151607


def _eigen_unitary_2x2(u):
    a = 0.5 * (u[:, 0, 0] - u[:, 1, 1])
    b = u[:, 0, 1]
    c = u[:, 1, 0]
    mu = np.sqrt(a * a + b * c)
    # eigenvector of the traceless part for +mu; take the better-conditioned form
    v1 = np.stack([b, mu - a], axis=-1)
    v2 = np.stack([mu + a, c], axis=-1)
    n1 = np.linalg.norm(v1, axis=-1)
    n2 = np.linalg.norm(v2, axis=-1)
    v = np.where((n1 >= n2)[:, None], v1, v2)
    norm = np.maximum(n1, n2)
    degenerate = norm < 1e-300
    v = np.where(degenerate[:, None], np.array([1.0, 0.0]), v / np.where(degenerate, 1.0, norm)[:, None])
    vecs = np.empty_like(u)
    vecs[:, :, 0] = v
    vecs[:, 0, 1] = -np.conj(v[:, 1])
    vecs[:, 1, 1] = np.conj(v[:, 0])
    vals = np.einsum("kin,kij,kjn->kn", np.conj(vecs), u, vecs)
    return vals, vecs


def _greedy_match(overlaps):
    """Greedy assignment on a stack of overlap matrices ``|<old_n|new_m>|``.

    Returns ``perm[k, n]`` (the new column matched to old label ``n``) and
    the number of ambiguous picks.
    """
    k_steps, n, _ = overlaps.shape
    work = overlaps.copy()
    perm = np.empty((k_steps, n), dtype=int)
    rows = np.arange(k_steps)
    ties = 0
    for _ in range(n):
        flat = work.reshape(k_steps, -1)
        best = np.argmax(flat, axis=1)
        r, c = np.divmod(best, n)
        top = flat[rows, best]
        # runner-up in the same row decides whether the pick was ambiguous
        row_vals = work[rows, r].copy()
        row_vals[rows, c] = -1.0
        ties += int(np.count_nonzero(top - row_vals.max(axis=1) < TIE_TOL))
        perm[rows, r] = c
        work[rows, r, :] = -2.0
        work[rows, :, c] = -2.0
    return perm, ties


def track_eigensystem(track):
    """Fill in continuously labelled eigenvectors and unwrapped eigenphases.

    Step ``k+1`` is matched to step ``k`` by greedy maximal overlap; the
    gauge of each eigenvector makes ``<u_n(t_k)|u_n(t_k+1)>`` real and
    nonnegative, and eigenphases are unwrapped so consecutive values differ
    by less than pi. ``U(0) = 1`` is fully degenerate, so its eigenbasis is
    seeded from step 1 with all phases zero.
    """
    u = track.unitaries
    n_pts, n, _ = u.shape
    if n_pts < 2:
        track.eps = np.zeros((n_pts, n))
        track.vecs = np.broadcast_to(np.eye(n, dtype=complex), u.shape).copy()
        return track

    vals, vecs = _eigen_unitary(u[1:])
    raw_eps = -np.angle(vals)
    # label order at the first step: descending eigenphase
    order0 = np.argsort(-raw_eps[0], kind="stable")

    ties = 0
    k_rest = n_pts - 2
    if k_rest:
        overlaps = np.abs(np.einsum("kin,kim->knm", np.conj(vecs[:-1]), vecs[1:]))
        step_perm, ties = _greedy_match(overlaps)
        perm = np.empty((n_pts - 1, n), dtype=int)
        perm[0] = order0
        for k in range(1, n_pts - 1):
            perm[k] = step_perm[k - 1][perm[k - 1]]
    else:
        perm = order0[None]

    idx = np.arange(n_pts - 1)[:, None]
    vecs = vecs[idx[:, :, None], np.arange(n)[None, :, None], perm[:, None, :]]
    raw_eps = raw_eps[idx, perm]

    # gauge: chain the phase of <u(k)|u(k+1)> so that each link is real >= 0
    links = np.einsum("kin,kin->kn", np.conj(vecs[:-1]), vecs[1:])
    mags = np.abs(links)
    unit = np.where(mags > 0, np.conj(links) / np.where(mags > 0, mags, 1.0), 1.0)
    gauge = np.concatenate([np.ones((1, n), dtype=complex), np.cumprod(unit, axis=0)], axis=0)
    vecs = vecs * gauge[:, None, :]

    eps = np.unwrap(np.concatenate([np.zeros((1, n)), raw_eps], axis=0), axis=0)
    vecs = np.concatenate([vecs[:1], vecs], axis=0)

    if ties:
        warnings.warn(
            f"{ties} ambiguous eigenvector matches (overlaps within {TIE_TOL}); "
            "resolved by lowest index",
            DegeneracyWarning,
            stacklevel=2,
        )
    track.eps = eps
    track.vecs = vecs
    track.n_ties = ties
    return track


def build_jump_channels(track, grid):
    """Channel table for all ``N**2`` ordered pairs at every grid point.

    ``omega`` is the time derivative of the unwrapped ``phi``: central
    differences inside the grid, second-order one-sided at the ends.
    """
    if track.eps is None:
        raise ValueError("track has no eigensystem; call track_eigensystem first")
    phi = track.eps[:, :, None] - track.eps[:, None, :]
    if phi.shape[0] >= 3:
        omega = np.gradient(phi, grid.dt, axis=0, edge_order=2)
    elif phi.shape[0] == 2:
        omega = np.gradient(phi, grid.dt, axis=0)
    else:
        omega = np.zeros_like(phi)
    return JumpChannelTable(vecs=track.vecs, phi=phi, omega=omega)


def dressed_dynamics(system, pulses, grid):
    """Propagate, track and build channels in one call."""
    track = track_eigensystem(propagate_unitary(system, pulses, grid))
    return track, build_jump_channels(track, grid)
