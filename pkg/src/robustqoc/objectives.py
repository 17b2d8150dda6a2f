"""State and gate fidelities and the combined fidelity + robustness objective."""

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import dressed_dynamics
from .lindblad import build_liouvillian, evolve_master
from .linalg import dagger, is_unitary

__all__ = [
    "ObjectiveSpec",
    "state_fidelity",
    "initial_state_basis",
    "gate_fidelity",
    "unitary_task_fidelity",
    "noisy_task_fidelity",
    "noisy_final_states",
    "total_objective",
    "mean_overlap",
]

TASKS = ("state_transfer", "gate")


@dataclass(frozen=True)
class ObjectiveSpec:
    """What a control run is asked to do.

    For ``task="state_transfer"`` the target state is
    ``u_target @ rho_initial @ u_target^+``; for ``task="gate"`` the
    fidelity is averaged over :func:`initial_state_basis`.
    """

    task: str
    u_target: np.ndarray
    rho_initial: np.ndarray = None
    c_weight: float = 0.0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        u = np.asarray(self.u_target, dtype=complex)
        if not is_unitary(u):
            raise ValueError("u_target must be unitary")
        object.__setattr__(self, "u_target", u)
        if self.task == "state_transfer":
            if self.rho_initial is None:
                raise ValueError("state transfer needs rho_initial")
            object.__setattr__(self, "rho_initial", np.asarray(self.rho_initial, dtype=complex))
        if self.c_weight < 0:
            raise ValueError("c_weight must be nonnegative")

    @property
    def dim(self):
        return self.u_target.shape[0]

    def initial_states(self):
        if self.task == "state_transfer":
            return self.rho_initial[None]
        return initial_state_basis(self.dim)

    def target_states(self):
        rho = self.initial_states()
        return self.u_target @ rho @ dagger(self.u_target)


def state_fidelity(rho_f, rho_tar):
    """Trace overlap ``Tr(rho_f rho_tar)``; equals the usual fidelity for pure targets."""
    rho_f = np.asarray(rho_f)
    rho_tar = np.asarray(rho_tar)
    if rho_f.shape != rho_tar.shape:
        raise ValueError(f"shape mismatch {rho_f.shape} vs {rho_tar.shape}")
    purity = np.trace(rho_tar @ rho_tar).real
    if abs(purity - 1) > 1e-8:
        warnings.warn(f"target state is not pure (purity {purity:.6f})", stacklevel=2)
    return float(np.trace(rho_f @ rho_tar).real)


def initial_state_basis(n):
    """``N**2 - 1`` pure states that, with the identity, span Hermitian matrices.

    Populations ``|j><j|`` for ``j < N-1`` followed by ``(|j>+|k>)/sqrt2`` and
    ``(|j>+i|k>)/sqrt2`` for every ``j < k``.
    """
    if n < 2:
        raise ValueError("dimension must be at least 2")
    eye = np.eye(n, dtype=complex)
    kets = [eye[j] for j in range(n - 1)]
    for j in range(n):
        for k in range(j + 1, n):
            kets.append((eye[j] + eye[k]) / np.sqrt(2))
            kets.append((eye[j] + 1j * eye[k]) / np.sqrt(2))
    kets = np.array(kets)
    return np.einsum("si,sj->sij", kets, np.conj(kets))


def mean_overlap(finals, targets):
    """Average of ``Tr(rho_f rho_tar)`` over a stack of state pairs."""
    return float(np.mean(np.einsum("sij,sji->s", finals, targets).real))


def gate_fidelity(u_real, u_target):
    u_real = np.asarray(u_real)
    u_target = np.asarray(u_target)
    if u_real.shape != u_target.shape:
        raise ValueError(f"shape mismatch {u_real.shape} vs {u_target.shape}")
    basis = initial_state_basis(u_real.shape[0])
    finals = u_real @ basis @ dagger(u_real)
    targets = u_target @ basis @ dagger(u_target)
    return mean_overlap(finals, targets)


def unitary_task_fidelity(u_final, objective):
    """Fidelity of the noise-free final propagator for the given task."""
    rho = objective.initial_states()
    finals = u_final @ rho @ dagger(u_final)
    return mean_overlap(finals, objective.target_states())


def noisy_final_states(system, pulses, objective, noise, bath, grid, check=True):
    """States at every grid point under the full master equation.

    Shape ``(n_steps + 1, n_states, N, N)``.
    """
    track, table = dressed_dynamics(system, pulses, grid)
    ltrack = build_liouvillian(track, table, noise, bath)
    return evolve_master(objective.initial_states(), ltrack, grid, check=check)


def noisy_task_fidelity(system, pulses, objective, noise, bath, grid):
    states = noisy_final_states(system, pulses, objective, noise, bath, grid)
    return mean_overlap(states[-1], objective.target_states())


def total_objective(j0, d_eff, c):
    return j0 + c * d_eff
