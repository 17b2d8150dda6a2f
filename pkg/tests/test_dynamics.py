import warnings

import numpy as np
import pytest

from robustqoc.dynamics import (
    ControlSystem,
    DegeneracyWarning,
    GridAccuracyError,
    PropagatorTrack,
    TimeGrid,
    _step_exp_taylor,
    build_jump_channels,
    dressed_dynamics,
    propagate_unitary,
    sample_controls,
    taylor_order,
    track_eigensystem,
)
from robustqoc.linalg import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z, dagger, expm, is_unitary

from .helpers import DELTA, driven_grid, qubit_system, random_hermitian, smooth_pulses

SIGMA_Z_SYSTEM = ControlSystem(DELTA / 2 * PAULI_Z)


def test_grid_properties():
    g = TimeGrid(10.0, 4)
    assert g.dt == 2.5
    np.testing.assert_allclose(g.times, [0, 2.5, 5, 7.5, 10])
    np.testing.assert_allclose(g.midpoints, [1.25, 3.75, 6.25, 8.75])
    assert g.trapezoid_weights().sum() == pytest.approx(10.0)
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)


def test_control_system_validation():
    with pytest.raises(ValueError):
        ControlSystem(np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(ValueError):
        ControlSystem(PAULI_Z, (np.eye(3),))


def test_sample_controls_checks_line_count():
    grid = TimeGrid(1.0, 4)
    with pytest.raises(ValueError):
        sample_controls(np.zeros((3, 4)), grid.midpoints, 2)


def test_free_propagator_closed_form():
    grid = driven_grid()
    track = propagate_unitary(SIGMA_Z_SYSTEM, np.zeros((0, grid.n_steps)), grid)
    t = grid.times
    expected = np.zeros((t.size, 2, 2), dtype=complex)
    expected[:, 0, 0] = np.exp(-1j * DELTA * t / 2)
    expected[:, 1, 1] = np.exp(1j * DELTA * t / 2)
    np.testing.assert_allclose(track.unitaries, expected, atol=1e-12)
    np.testing.assert_array_equal(track.unitaries[0], np.eye(2))


@pytest.mark.parametrize("dim", [2, 4])
def test_propagator_unitary_and_semigroup(dim):
    rng = np.random.default_rng(dim)
    h0 = 3e-3 * random_hermitian(rng, dim)
    controls = (random_hermitian(rng, dim), random_hermitian(rng, dim))
    system = ControlSystem(h0, controls)
    full = TimeGrid(200.0, 200)
    amps = smooth_pulses(full, amp=3e-3)
    track = propagate_unitary(system, amps, full)
    assert np.max(np.abs(dagger(track.unitaries) @ track.unitaries - np.eye(dim))) < 1e-10
    # first half then second half equals the whole
    half = TimeGrid(100.0, 100)
    first = propagate_unitary(system, amps[:, :100], half).unitaries[-1]
    second = propagate_unitary(system, amps[:, 100:], half).unitaries[-1]
    np.testing.assert_allclose(second @ first, track.unitaries[-1], atol=1e-10)


def test_step_exponential_matches_expm():
    rng = np.random.default_rng(11)
    system = ControlSystem(random_hermitian(rng, 3) * 0.05, (random_hermitian(rng, 3) * 0.1,))
    grid = TimeGrid(5.0, 5)
    amps = np.array([[0.1, -0.2, 0.05, 0.0, 0.3]])
    track = propagate_unitary(system, amps, grid)
    u = np.eye(3)
    for k in range(5):
        u = expm(-1j * grid.dt * (system.h0 + amps[0, k] * system.controls[0])) @ u
    np.testing.assert_allclose(track.unitaries[-1], u, atol=1e-13)


@pytest.mark.parametrize("theta", [1e-4, 0.05, 0.3, 0.499])
def test_adaptive_taylor_order_matches_expm(theta):
    rng = np.random.default_rng(12)
    h = random_hermitian(rng, 4)
    h *= theta / np.max(np.abs(np.linalg.eigvalsh(h)))
    order = taylor_order(theta)
    assert order <= 16
    np.testing.assert_allclose(_step_exp_taylor(h[None], 1.0, order)[0], expm(-1j * h), atol=2e-15)
    assert taylor_order(theta / 2) <= order


def test_grid_guard():
    grid = TimeGrid(1000.0, 10)
    with pytest.raises(GridAccuracyError):
        propagate_unitary(qubit_system(), np.full((2, 10), 1e-2), grid)


def test_constant_sigma_z_eigensystem():
    grid = driven_grid()
    track, table = dressed_dynamics(SIGMA_Z_SYSTEM, np.zeros((0, grid.n_steps)), grid)
    t = grid.times
    np.testing.assert_allclose(track.eps[:, 0], DELTA * t / 2, atol=1e-12)
    np.testing.assert_allclose(track.eps[:, 1], -DELTA * t / 2, atol=1e-12)
    np.testing.assert_array_equal(track.eps[0], [0, 0])
    # eigenvectors are constant, gauge fixed
    np.testing.assert_allclose(np.abs(track.vecs), np.broadcast_to(np.eye(2), track.vecs.shape), atol=1e-12)
    np.testing.assert_allclose(track.vecs, np.broadcast_to(track.vecs[0], track.vecs.shape), atol=1e-12)

    sigma_plus = np.array([[0, 1], [0, 0]], dtype=complex)
    np.testing.assert_allclose(table.ops[:, 0, 1], np.broadcast_to(sigma_plus, (t.size, 2, 2)), atol=1e-12)
    np.testing.assert_allclose(table.omega[:, 0, 1], DELTA, rtol=1e-10)
    np.testing.assert_allclose(table.omega[:, 1, 0], -DELTA, rtol=1e-10)
    np.testing.assert_allclose(table.omega[:, [0, 1], [0, 1]], 0.0, atol=1e-15)


def test_pi_pulse_eigenphases():
    tau = 1000.0
    grid = TimeGrid(tau, 500)
    system = ControlSystem(np.zeros((2, 2)), (PAULI_X / 2,))
    amps = np.full((1, grid.n_steps), np.pi / tau)
    track = track_eigensystem(propagate_unitary(system, amps, grid))
    vals = np.linalg.eigvals(track.unitaries[-1])
    np.testing.assert_allclose(vals[np.argsort(vals.imag)], [-1j, 1j], atol=1e-12)
    np.testing.assert_allclose(np.sort(track.eps[-1]), [-np.pi / 2, np.pi / 2], atol=1e-12)
    # continuous: linear growth in time, no jumps
    assert np.max(np.abs(np.diff(track.eps, axis=0))) < np.pi / 2 / 400


def _driven(n_steps=500, dim=2):
    grid = driven_grid(n_steps)
    if dim == 2:
        return grid, *dressed_dynamics(qubit_system(), smooth_pulses(grid), grid)
    k = np.kron
    system = ControlSystem(
        DELTA * k(PAULI_Z, PAULI_Z), (k(PAULI_Y, PAULI_I), k(PAULI_I, PAULI_Y), k(PAULI_Z, PAULI_I), k(PAULI_I, PAULI_Z))
    )
    t = grid.midpoints / grid.tau
    amps = 2e-3 * np.array([np.sin(np.pi * t), np.sin(2 * np.pi * t), 0.7 * np.sin(np.pi * t) ** 2, -0.4 * np.sin(3 * np.pi * t)])
    return grid, *dressed_dynamics(system, amps, grid)


@pytest.mark.parametrize("dim", [2, 4])
def test_driven_track_invariants(dim):
    grid, track, table = _driven(dim=dim)
    u, vecs, eps = track.unitaries, track.vecs, track.eps
    eye = np.eye(dim)
    assert np.max(np.abs(dagger(u) @ u - eye)) < 1e-10
    # U |u_n> = exp(-i eps_n) |u_n>
    assert np.max(np.abs(u @ vecs - vecs * np.exp(-1j * eps)[:, None, :])) < 1e-8
    recon = (vecs * np.exp(-1j * eps)[:, None, :]) @ dagger(vecs)
    assert np.max(np.abs(recon - u)) < 1e-8
    assert np.max(np.abs(np.diff(eps, axis=0))) < np.pi
    links = np.einsum("kin,kin->kn", np.conj(vecs[1:-1]), vecs[2:])
    assert np.max(np.abs(links.imag)) < 1e-10
    assert links.real.min() > 0


@pytest.mark.parametrize("dim", [2, 4])
def test_channel_table_invariants(dim):
    grid, track, table = _driven(dim=dim)
    ops = table.ops
    norms = np.sqrt(np.sum(np.abs(ops) ** 2, axis=(-2, -1)))
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)
    # eigenoperator relation at every step and channel
    u = track.unitaries[:, None, None]
    lhs = dagger(u) @ ops @ u
    rhs = np.exp(1j * table.phi)[..., None, None] * ops
    assert np.max(np.abs(lhs - rhs)) < 1e-8
    # conjugate pairs
    np.testing.assert_allclose(ops, dagger(np.swapaxes(ops, 1, 2)), atol=1e-14)
    np.testing.assert_allclose(table.omega, -np.swapaxes(table.omega, 1, 2), atol=1e-8)
    # completeness of the diagonal channels
    diag = ops[:, np.arange(dim), np.arange(dim)].sum(axis=1)
    np.testing.assert_allclose(diag, np.broadcast_to(np.eye(dim), diag.shape), atol=1e-12)


def test_omega_second_order_convergence():
    """Halving dt shrinks the omega error by about 4x (reference: 8x finer grid)."""
    _, _, ref_table = _fine(4000)
    errors = []
    for n in (250, 500, 1000):
        grid, _, table = _fine(n)
        stride = 4000 // n
        errors.append(np.max(np.abs(table.omega - ref_table.omega[::stride])))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders >= 1.9), orders


def _fine(n_steps):
    grid = driven_grid(n_steps)
    return grid, *dressed_dynamics(qubit_system(), _SmoothPulses(grid.tau), grid)


class _SmoothPulses:
    """Pulses as functions of time, so every grid samples the same shape."""

    def __init__(self, tau):
        self.tau = tau

    def values(self, t):
        s = np.asarray(t) / self.tau
        return np.array([4e-3 * np.sin(np.pi * s) * (1 + 0.5 * np.cos(3 * np.pi * s)), 2e-3 * np.sin(2 * np.pi * s)])


def test_ambiguous_match_warns():
    # step 2 eigenvectors are 45-degree mixtures of two step-1 eigenvectors
    mix = np.eye(3, dtype=complex)
    mix[:2, :2] = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    u1 = np.diag(np.exp(-1j * np.array([0.1, 0.2, -0.3])))
    u2 = mix @ np.diag(np.exp(-1j * np.array([0.15, 0.25, -0.35]))) @ dagger(mix)
    track = PropagatorTrack(np.stack([np.eye(3), u1, u2]), np.zeros((2, 3, 3)))
    with pytest.warns(DegeneracyWarning):
        track_eigensystem(track)
    assert track.n_ties > 0


def test_single_step_grid():
    grid = TimeGrid(1.0, 1)
    track, table = dressed_dynamics(qubit_system(), np.array([[0.1], [0.0]]), grid)
    assert table.omega.shape == (2, 2, 2)
    assert np.all(np.isfinite(table.omega))


def test_channels_require_eigensystem():
    grid = TimeGrid(1.0, 2)
    track = PropagatorTrack(np.broadcast_to(np.eye(2), (3, 2, 2)), np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        build_jump_channels(track, grid)


def test_nondegenerate_driven_run_has_no_warning():
    grid = driven_grid()
    with warnings.catch_warnings():
        warnings.simplefilter("error", DegeneracyWarning)
        dressed_dynamics(qubit_system(), smooth_pulses(grid), grid)
    assert is_unitary(propagate_unitary(qubit_system(), smooth_pulses(grid), grid).unitaries[-1])
