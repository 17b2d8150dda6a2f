"""
The three benchmark experiments: two-level state transfer, Hadamard and CZ.

Each run optimizes a target-only pulse (``c = 0``) and a robust pulse
(``c > 0``) with identical optimizer settings and seed, then evaluates both
under the master equation over a grid of coupling strengths, once for the
task's specific noise operator and once for a seeded ensemble of random
couplings. The random ensemble reuses the pulses optimized against the
specific channel unchanged.
"""

import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import scipy

from .bath import BathSpec
from .crab import OptimizerConfig, optimize
from .dynamics import ControlSystem, TimeGrid, dressed_dynamics
from .lindblad import LiouvillianTrack, NoiseChannel, build_liouvillian, evolve_master
from .linalg import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z, commutator_superop
from .objectives import ObjectiveSpec, mean_overlap, unitary_task_fidelity

__all__ = [
    "TASKS",
    "STRATEGIES",
    "ExperimentConfig",
    "StrategyResult",
    "RunReport",
    "two_level_system",
    "cz_system",
    "random_two_level_coupling",
    "random_two_qubit_coupling",
    "bloch_vector",
    "run_state_transfer",
    "run_hadamard",
    "run_cz",
    "run_experiment",
]

log = logging.getLogger(__name__)

TASKS = ("transfer2", "hadamard", "cz")
STRATEGIES = ("target-only", "robust")

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CZ = np.diag([1, 1, 1, -1]).astype(complex)

# cutoff over the typical Bohr frequency, and that frequency in units of delta
CUTOFF_FACTOR = 10.0
BOHR_SCALE = {"transfer2": 1.0, "hadamard": 1.0, "cz": 2.0}
DEFAULT_C = {"transfer2": 1e-2, "hadamard": 1e-2, "cz": 2e-3}
# half-width of the uniform CRAB start distribution, shared by both strategies;
# wide enough that target-only runs land on generic (noise-sensitive) pulses
DEFAULT_INIT_AMPLITUDE = {"transfer2": 0.03, "hadamard": 0.03, "cz": 0.015}
# keeps the ensemble stream apart from the optimizer's restart streams
ENSEMBLE_SALT = 20


@dataclass
class ExperimentConfig:
    """All knobs of one benchmark run (atomic units, hbar = 1).

    ``beta``, ``omega_c``, ``c_weight`` and ``init_amplitude`` default to
    task-dependent values when left as ``None``: ``1/delta``, ten times the
    typical Bohr frequency of the drift, the robustness weight of the
    benchmark, and the CRAB start-point half-width.
    """

    task: str = "transfer2"
    delta: float = 3e-3
    beta: float = None
    omega_c: float = None
    tau: float = 1000.0
    n_steps: int = 500
    c_weight: float = None
    lambda_max: float = 0.1
    n_lambda: int = 21
    ensemble_size: int = 20
    seed: int = 0
    n_restarts: int = 10
    init_amplitude: float = None
    max_iterations: int = 500
    convergence_tol: float = 1e-8

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.beta is None:
            self.beta = 1.0 / self.delta
        if self.omega_c is None:
            self.omega_c = CUTOFF_FACTOR * BOHR_SCALE[self.task] * self.delta
        if self.c_weight is None:
            self.c_weight = DEFAULT_C[self.task]
        if self.init_amplitude is None:
            self.init_amplitude = DEFAULT_INIT_AMPLITUDE[self.task]
        for name in ("delta", "beta", "omega_c", "tau", "c_weight", "init_amplitude"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if self.lambda_max < 0 or not math.isfinite(self.lambda_max):
            raise ValueError(f"lambda_max must be nonnegative, got {self.lambda_max}")
        if self.n_lambda < 1:
            raise ValueError("n_lambda must be at least 1")
        if self.n_steps < 1 or self.n_restarts < 1 or self.max_iterations < 0:
            raise ValueError("n_steps and n_restarts must be positive, max_iterations nonnegative")
        if self.ensemble_size < 0:
            raise ValueError("ensemble_size must be nonnegative")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    @property
    def lambdas(self):
        return np.linspace(0.0, self.lambda_max, self.n_lambda)

    @property
    def grid(self):
        return TimeGrid(self.tau, self.n_steps)

    @property
    def bath(self):
        return BathSpec(omega_c=self.omega_c, beta=self.beta, zero_tol=1e-6 * self.delta)

    def optimizer(self, jobs=1):
        return OptimizerConfig(
            n_restarts=self.n_restarts,
            init_amplitude=self.init_amplitude,
            max_iterations=self.max_iterations,
            convergence_tol=self.convergence_tol,
            seed=self.seed,
            jobs=jobs,
        )


@dataclass
class StrategyResult:
    name: str
    c_weight: float
    coeffs: np.ndarray
    j: float
    j0: float
    d_eff: float
    unitary_fidelity: float
    restart: int
    trace: list
    restart_objectives: list
    n_evaluations: int
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class RunReport:
    """Everything a run produces.

    ``fidelity_rows`` holds ``(lambda, strategy, noise_kind, realization,
    fidelity)`` tuples; ``pulses`` maps a strategy to its ``(n_lines,
    n_steps + 1)`` samples on ``times``; ``bloch`` maps a strategy to a
    ``(n_steps + 1, 3)`` trajectory (two-level tasks only).
    """

    config: ExperimentConfig
    strategies: dict
    lambdas: np.ndarray
    fidelity_rows: list
    times: np.ndarray
    pulses: dict
    bloch: dict
    couplings: list
    timing: dict = field(default_factory=dict, compare=False)

    def fidelities(self, strategy, noise_kind, lam_index=-1):
        """Fidelities at one grid value of lambda, ordered by realization."""
        lam = self.lambdas[lam_index]
        rows = [r for r in self.fidelity_rows if r[0] == lam and r[1] == strategy and r[2] == noise_kind]
        return np.array([r[4] for r in sorted(rows, key=lambda r: r[3])])

    def summary(self):
        out = {}
        for name in self.strategies:
            specific = self.fidelities(name, "specific")
            rand = self.fidelities(name, "random")
            out[name] = {
                "d_eff": self.strategies[name].d_eff,
                "max_amplitude": float(np.max(np.abs(self.pulses[name]))) if name in self.pulses else None,
                "fidelity_lambda0": _first(self.fidelities(name, "specific", 0)),
                "specific_fidelity_max_lambda": _first(specific),
                "random_mean_max_lambda": float(rand.mean()) if rand.size else None,
                "random_std_max_lambda": float(rand.std()) if rand.size else None,
                "random_min_max_lambda": float(rand.min()) if rand.size else None,
            }
        if set(STRATEGIES) <= set(out):
            t, r = out["target-only"], out["robust"]
            for kind, key in (("specific", "specific_fidelity_max_lambda"), ("random", "random_mean_max_lambda")):
                if t[key] is not None:
                    out[f"{kind}_infidelity_ratio"] = _ratio(1 - t[key], 1 - r[key])
        return out

    def to_dict(self):
        """JSON-ready view. Timing lives elsewhere so this stays reproducible."""
        strategies = {}
        for name, s in self.strategies.items():
            d = asdict(s)
            d.pop("wall_time")
            d["coeffs"] = np.asarray(s.coeffs).tolist()
            d["trace"] = [float(v) for v in s.trace]
            d["restart_objectives"] = [float(v) for v in s.restart_objectives]
            strategies[name] = d
        return {
            "config": asdict(self.config),
            "versions": versions(),
            "seeds": {"optimizer": self.config.seed, "ensemble": [ENSEMBLE_SALT, self.config.seed]},
            "lambdas": self.lambdas.tolist(),
            "strategies": strategies,
            "summary": self.summary(),
            "couplings": [_complex_matrix(a) for a in self.couplings],
        }


def _first(values):
    return float(values[0]) if values.size else None


def _ratio(a, b):
    return float(a / b) if b > 0 else None


def _complex_matrix(a):
    return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}


def versions():
    from . import __version__

    return {"robustqoc": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def two_level_system(delta):
    """``H = delta/2 sz + u_x sx/2 + u_y sy/2``."""
    return ControlSystem(delta / 2 * PAULI_Z, (PAULI_X / 2, PAULI_Y / 2))


def cz_system(delta):
    """Drift ``delta sz(x)sz`` with controls on ``sy`` and ``sz`` of each qubit."""
    k = np.kron
    controls = (k(PAULI_Y, PAULI_I), k(PAULI_I, PAULI_Y), k(PAULI_Z, PAULI_I), k(PAULI_I, PAULI_Z))
    return ControlSystem(delta * k(PAULI_Z, PAULI_Z), controls)


def random_two_level_coupling(rng):
    """``n . sigma`` with ``n`` uniform on the unit sphere."""
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    return n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z


def random_two_qubit_coupling(rng):
    """``sum a_mn s_m (x) s_n`` with Gaussian ``a`` normalized to unit 2-norm."""
    a = rng.normal(size=(4, 4))
    a /= np.linalg.norm(a)
    paulis = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)
    return sum(a[m, n] * np.kron(paulis[m], paulis[n]) for m in range(4) for n in range(4))


def bloch_vector(rho):
    """``(Tr(rho sx), Tr(rho sy), Tr(rho sz))`` of a qubit state (or a stack)."""
    rho = np.asarray(rho)
    if rho.shape[-2:] != (2, 2):
        raise ValueError(f"Bloch vectors need 2x2 density matrices, got shape {rho.shape}")
    return np.stack([np.einsum("...ij,ji->...", rho, p).real for p in (PAULI_X, PAULI_Y, PAULI_Z)], axis=-1)


def _pure(ket):
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


@dataclass(frozen=True)
class _Task:
    system: ControlSystem
    u_target: np.ndarray
    kind: str
    specific_noise: np.ndarray
    draw_coupling: object
    rho_initial: np.ndarray = None
    bloch_initial: np.ndarray = None


def _task_definition(cfg):
    if cfg.task == "transfer2":
        rho_minus_x = _pure(np.array([1, -1]) / np.sqrt(2))
        return _Task(
            two_level_system(cfg.delta), PAULI_Z, "state_transfer", PAULI_Z, random_two_level_coupling,
            rho_initial=rho_minus_x, bloch_initial=rho_minus_x,
        )
    if cfg.task == "hadamard":
        return _Task(
            two_level_system(cfg.delta), HADAMARD, "gate", PAULI_Z, random_two_level_coupling,
            bloch_initial=_pure([0, 1]),
        )
    return _Task(cz_system(cfg.delta), CZ, "gate", np.kron(PAULI_Y, PAULI_I), random_two_qubit_coupling)


class _Evaluator:
    """Noisy fidelities of one pulse, sharing the dressed dynamics across couplings."""

    def __init__(self, system, amps, objective, bath, grid):
        self.objective = objective
        self.bath = bath
        self.grid = grid
        self.track, self.table = dressed_dynamics(system, amps, grid)
        self.coherent = commutator_superop(self.track.hamiltonians)
        self.targets = objective.target_states()

    def unitary_fidelity(self):
        return unitary_task_fidelity(self.track.unitaries[-1], self.objective)

    def _generators(self, a_op):
        unit = build_liouvillian(self.track, self.table, NoiseChannel(a_op, 1.0), self.bath)
        # the generator is affine in lambda, so one build serves the whole sweep
        return lambda lam: LiouvillianTrack(
            self.coherent + lam * (unit.generators - self.coherent), lam * unit.dissipators
        )

    def states(self, a_op, lam, rho0):
        return evolve_master(rho0, self._generators(a_op)(lam), self.grid)

    def sweep(self, a_op, lambdas):
        at = self._generators(a_op)
        rho0 = self.objective.initial_states()
        return [mean_overlap(evolve_master(rho0, at(lam), self.grid)[-1], self.targets) for lam in lambdas]


def _check_lambda0(fids, unitary, strategy):
    gap = abs(fids[0] - unitary)
    if gap > 1e-8:
        raise RuntimeError(f"{strategy}: lambda = 0 fidelity differs from the unitary one by {gap:.3e}")


def run_experiment(cfg, strategies=STRATEGIES, jobs=1):
    """Optimize the requested strategies and evaluate them; returns a :class:`RunReport`."""
    unknown = set(strategies) - set(STRATEGIES)
    if unknown or not strategies:
        raise ValueError(f"strategies must be drawn from {STRATEGIES}, got {strategies}")
    task = _task_definition(cfg)
    grid, bath, lambdas = cfg.grid, cfg.bath, cfg.lambdas
    timing = {}

    rng = np.random.default_rng([ENSEMBLE_SALT, cfg.seed])
    couplings = [task.draw_coupling(rng) for _ in range(cfg.ensemble_size)]

    results, rows, pulses, bloch = {}, [], {}, {}
    for name in STRATEGIES:
        if name not in strategies:
            continue
        c = 0.0 if name == "target-only" else cfg.c_weight
        objective = ObjectiveSpec(task.kind, task.u_target, task.rho_initial, c)
        opt = optimize(task.system, objective, bath, grid, cfg.optimizer(jobs))
        timing[f"optimize/{name}"] = opt.wall_time
        log.info("%s: J = %.6e, J0 = %.6e, D_eff = %.6g", name, opt.j, opt.j0, opt.d_eff)

        start = time.perf_counter()
        ctrl = opt.pulses(cfg.tau)
        ev = _Evaluator(task.system, ctrl, objective, bath, grid)
        f_unitary = ev.unitary_fidelity()
        specific = ev.sweep(task.specific_noise, lambdas)
        _check_lambda0(specific, f_unitary, name)
        rows += [(float(lam), name, "specific", 0, f) for lam, f in zip(lambdas, specific)]
        for i, a_op in enumerate(couplings):
            fids = ev.sweep(a_op, lambdas)
            _check_lambda0(fids, f_unitary, name)
            rows += [(float(lam), name, "random", i, f) for lam, f in zip(lambdas, fids)]
        timing[f"evaluate/{name}"] = time.perf_counter() - start

        pulses[name] = ctrl.values(grid.times)
        if task.bloch_initial is not None:
            states = ev.states(task.specific_noise, cfg.lambda_max, task.bloch_initial)
            bloch[name] = bloch_vector(states)
        results[name] = StrategyResult(
            name=name,
            c_weight=c,
            coeffs=opt.coeffs,
            j=opt.j,
            j0=opt.j0,
            d_eff=opt.d_eff,
            unitary_fidelity=f_unitary,
            restart=opt.restart,
            trace=opt.trace,
            restart_objectives=opt.restart_objectives,
            n_evaluations=opt.n_evaluations,
            wall_time=opt.wall_time,
        )

    return RunReport(
        config=cfg,
        strategies=results,
        lambdas=lambdas,
        fidelity_rows=rows,
        times=grid.times,
        pulses=pulses,
        bloch=bloch,
        couplings=couplings,
        timing=timing,
    )


def _run_task(expected, cfg, **kwargs):
    if cfg.task != expected:
        raise ValueError(f"config task is {cfg.task!r}, expected {expected!r}")
    return run_experiment(cfg, **kwargs)


def run_state_transfer(cfg, **kwargs):
    """``rho_-x -> rho_+x`` on the driven two-level system."""
    return _run_task("transfer2", cfg, **kwargs)


def run_hadamard(cfg, **kwargs):
    return _run_task("hadamard", cfg, **kwargs)


def run_cz(cfg, **kwargs):
    return _run_task("cz", cfg, **kwargs)
