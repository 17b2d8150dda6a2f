import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustqoc.bath import BathSpec, occupation, rate_gamma, spectral_density

from .helpers import DELTA

BATH = BathSpec(omega_c=10 * DELTA, beta=1 / DELTA, zero_tol=1e-6 * DELTA)


def test_spec_validation():
    with pytest.raises(ValueError):
        BathSpec(omega_c=0.0, beta=1.0)
    with pytest.raises(ValueError):
        BathSpec(omega_c=1.0, beta=-1.0)
    with pytest.raises(ValueError):
        BathSpec(omega_c=1.0, beta=1.0, zero_tol=-1.0)


def test_spectral_density_values():
    assert spectral_density(0.0, BATH) == 0.0
    wc = BATH.omega_c
    assert spectral_density(wc, BATH) == pytest.approx(wc * np.exp(-1), rel=1e-14)


def test_spectral_density_peaks_at_three_omega_c():
    w = np.linspace(0, 20 * BATH.omega_c, 200001)
    peak = w[np.argmax(spectral_density(w, BATH))]
    assert peak == pytest.approx(3 * BATH.omega_c, abs=w[1] - w[0])


def test_spectral_density_rejects_negative():
    with pytest.raises(ValueError):
        spectral_density(-1e-3, BATH)


def test_occupation_values():
    beta = BATH.beta
    assert occupation(np.log(2) / beta, BATH) == pytest.approx(1.0, rel=1e-14)
    assert occupation(10 / beta, BATH) == pytest.approx(np.exp(-10), rel=1e-4)
    # small-argument limit: x N(x) = 1 - x/2 + x**2/12 - ...
    x = 1e-4
    assert occupation(x / beta, BATH) * x == pytest.approx(1 - x / 2 + x**2 / 12, abs=1e-12)
    assert abs(occupation(x / beta, BATH) * x - 1) < x


@pytest.mark.parametrize("w", [0.0, -1e-3])
def test_occupation_rejects_nonpositive(w):
    with pytest.raises(ValueError):
        occupation(w, BATH)


def test_rate_emission_value():
    # independent evaluation straight from the defining formulas
    d, wc, beta = DELTA, 10 * DELTA, 1 / DELTA
    j = d**3 / wc**2 * np.exp(-d / wc)
    n_bar = 1 / (np.exp(beta * d) - 1)
    assert rate_gamma(-d, BATH) == pytest.approx(2 * np.pi * j * (n_bar + 1), rel=1e-13)
    assert rate_gamma(d, BATH) == pytest.approx(2 * np.pi * j * n_bar, rel=1e-13)


def test_rate_zero_frequency():
    assert rate_gamma(0.0, BATH) == 0.0
    assert rate_gamma(0.0, BathSpec(1.0, 1.0)) == 0.0
    assert np.all(rate_gamma(np.array([-0.5, 0.0, 0.5]) * BATH.zero_tol, BATH) == 0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-4, 1e2))
def test_detailed_balance(x):
    w = x * DELTA
    ratio = rate_gamma(w, BATH) / rate_gamma(-w, BATH)
    assert ratio == pytest.approx(np.exp(-BATH.beta * w), rel=1e-12)


def test_rate_nonnegative_and_continuous_at_tolerance():
    w = np.linspace(-1, 1, 10001) * 50 * DELTA
    assert np.all(rate_gamma(w, BATH) >= 0)
    eps = BATH.zero_tol
    jump = rate_gamma(-eps * (1 + 1e-9), BATH)
    bound = 2 * np.pi * spectral_density(eps, BATH) * (occupation(eps, BATH) + 1)
    assert jump <= bound * (1 + 1e-6)
    assert bound < 1e-9 * rate_gamma(-DELTA, BATH)
