"""Super-Ohmic thermal bath: spectral density, occupation and rates."""

from dataclasses import dataclass

import numpy as np

__all__ = ["BathSpec", "spectral_density", "occupation", "rate_gamma"]


@dataclass(frozen=True)
class BathSpec:
    """Bath parameters in atomic units.

    Attributes
    ----------
    omega_c : float
        Cutoff frequency of the super-Ohmic spectral density.
    beta : float
        Inverse temperature (k_B = 1).
    zero_tol : float
        Frequencies with ``|omega| <= zero_tol`` are treated as exactly
        zero (pure dephasing channels, whose rate vanishes).
    """

    omega_c: float
    beta: float
    zero_tol: float = 0.0

    def __post_init__(self):
        if not (self.omega_c > 0 and self.beta > 0):
            raise ValueError(f"omega_c and beta must be positive, got {self.omega_c}, {self.beta}")
        if self.zero_tol < 0:
            raise ValueError("zero_tol must be nonnegative")


def spectral_density(omega, spec):
    """``J(w) = w**3 / omega_c**2 * exp(-w / omega_c)`` for ``w >= 0``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("spectral density is defined for omega >= 0 only")
    out = omega**3 / spec.omega_c**2 * np.exp(-omega / spec.omega_c)
    return out if out.ndim else float(out)


def occupation(omega, spec):
    """Bose-Einstein occupation ``1 / (exp(beta w) - 1)`` for ``w > 0``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("occupation is defined for omega > 0 only")
    out = 1.0 / np.expm1(spec.beta * omega)
    return out if out.ndim else float(out)


def rate_gamma(omega, spec):
    """One-sided bath rate at Bohr frequency `omega`.

    Negative frequencies are emission channels and carry ``N + 1``;
    positive frequencies are absorption channels and carry ``N``. The
    rate is zero for ``|omega| <= spec.zero_tol``, which is the exact
    super-Ohmic limit at the origin.
    """
    omega = np.asarray(omega, dtype=float)
    w = np.abs(omega)
    active = w > spec.zero_tol
    # avoid 0/0 on inactive entries; they are masked out below
    w_safe = np.where(active, w, 1.0)
    j = w_safe**3 / spec.omega_c**2 * np.exp(-w_safe / spec.omega_c)
    n_bar = 1.0 / np.expm1(spec.beta * w_safe)
    out = np.where(omega < 0, 2 * np.pi * j * (n_bar + 1), 2 * np.pi * j * n_bar)
    out = np.where(active, out, 0.0)
    return out if out.ndim else float(out)
