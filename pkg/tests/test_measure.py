import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpsmooth import measure as ms
from cpsmooth.errors import DomainError, InputError, ResourceError
from cpsmooth.measure import SignedMeasure
from cpsmooth import random_instances as ri

from oracles import (
    kolmogorov_gap, law_distance_tv, measure_as_dict, poisson_pmf, poly_mul, series_exp,
)

SQRT2 = math.sqrt(2)


def assert_law(M, expected, atol=1e-15):
    got = measure_as_dict(M)
    assert set(np.round(list(got), 9)) == set(np.round(list(expected), 9))
    for x, m in expected.items():
        assert M.mass_at(x) == pytest.approx(m, abs=atol)


# -- construction ----------------------------------------------------------------


def test_from_atoms_examples():
    assert_law(ms.from_atoms([(0, 1)]), {0.0: 1.0})
    assert_law(ms.from_atoms([(1, 0.5), (1, 0.5)]), {1.0: 1.0})
    B = ms.from_atoms([(0, 0.81), (1, 0.18), (2, 0.01)])
    assert_law(B, {0.0: 0.81, 1.0: 0.18, 2.0: 0.01})
    assert B.is_distribution()


def test_merge_is_relative_and_pruning_tracks_mass():
    M = ms.from_atoms([(1e6, 0.5), (1e6 + 1e-4, 0.5)])
    assert len(M) == 1
    N = ms.from_atoms([(0, 1.0), (1, 1e-17)])
    assert len(N) == 1
    assert N.dropped_mass_bound == pytest.approx(1e-17)


@pytest.mark.parametrize("bad", [
    [(float("nan"), 1.0)],
    [(0.0, float("inf"))],
])
def test_from_atoms_rejects_nonfinite(bad):
    with pytest.raises(InputError):
        ms.from_atoms(bad)


def test_scale_support():
    B = ms.bernoulli(0.3)
    assert ms.tv_distance(ms.scale_support(B, 1), B) == 0
    assert_law(ms.scale_support(ms.dirac(2), 0.5), {1.0: 1.0})
    assert_law(ms.scale_support(B, SQRT2), {0.0: 0.7, SQRT2: 0.3})


# -- convolution ---------------------------------------------------------------


def test_convolution_examples():
    assert_law(ms.convolve(ms.dirac(1.5), ms.dirac(-4)), {-2.5: 1.0})
    b = ms.bernoulli(0.5)
    assert_law(b * b, {0.0: 0.25, 1.0: 0.5, 2.0: 0.25})
    four = ms.convolve(b, ms.scale_support(b, SQRT2))
    assert_law(four, {0.0: 0.25, 1.0: 0.25, SQRT2: 0.25, 1 + SQRT2: 0.25})


def test_powers():
    b = ms.bernoulli(0.1)
    assert_law(b**0, {0.0: 1.0})
    assert_law(b**2, {0.0: 0.81, 1.0: 0.18, 2.0: 0.01}, atol=1e-16)
    seq = ms.dirac(0.0)
    for _ in range(100):
        seq = ms.convolve(seq, b)
    assert ms.tv_distance(ms.convolve_power(b, 100), seq) <= 1e-12


def test_convolution_off_lattice_matches_dict_oracle():
    rng = np.random.default_rng(3)
    A = ri.random_signed_measure(rng, max_atoms=20)
    B = ri.random_signed_measure(rng, max_atoms=20)
    assert law_distance_tv(measure_as_dict(A * B), poly_mul(measure_as_dict(A), measure_as_dict(B))) < 1e-12


# -- exponential -----------------------------------------------------------------


def test_exp_basic():
    assert_law(ms.exp_measure(ms.zero_measure()), {0.0: 1.0})
    P = ms.exp_measure(ms.dirac(1) - ms.dirac(0))
    assert P.mass_at(0) == pytest.approx(0.36787944117144233, abs=1e-15)
    for k in range(10):
        assert P.mass_at(k) == pytest.approx(math.exp(-1) / math.factorial(k), abs=1e-15)


def test_exp_matches_direct_series():
    d = ms.dirac(1) - ms.dirac(0)
    W = 0.1 * d + 0.01 * (d * d)
    ref = series_exp(measure_as_dict(W), 40)
    assert law_distance_tv(measure_as_dict(ms.exp_measure(W)), ref) <= 1e-12


@pytest.mark.parametrize("lam", [0.5, 10.0, 64.0, 300.0])
def test_exp_large_rates_stay_accurate(lam):
    P = ms.exp_measure(lam * (ms.dirac(1) - ms.dirac(0)))
    ref = poisson_pmf(lam, int(P.locations.max()))
    assert np.abs(P.masses - ref[P.locations.astype(int)]).max() < 1e-13
    assert P.total_mass == pytest.approx(1.0, abs=1e-12)


def test_exp_reports_certified_error():
    P = ms.exp_measure(5.0 * (ms.dirac(1) - ms.dirac(0)))
    assert 0 < P.dropped_mass_bound < 1e-13


def test_exp_cap_raises_resource_error():
    with pytest.raises(ResourceError) as err:
        ms.exp_measure(3.0 * ms.dirac(1.0), series_tol=1e-15, cap=5)
    assert err.value.required > 5


def test_exp_rejects_bad_tolerance():
    with pytest.raises(InputError):
        ms.exp_measure(ms.dirac(1.0), series_tol=0.0)


def test_exp_additivity_random():
    rng = np.random.default_rng(11)
    for _ in range(20):
        W1, W2 = ri.random_zero_mass_measure(rng), ri.random_zero_mass_measure(rng)
        lhs = ms.exp_measure(W1 + W2)
        rhs = ms.exp_measure(W1) * ms.exp_measure(W2)
        assert ms.tv_distance(lhs, rhs) <= 1e-10


# -- norms and functionals ---------------------------------------------------------


def test_norms():
    d = ms.dirac(1) - ms.dirac(0)
    assert ms.total_variation(d) == 2
    assert ms.total_variation(d * d) == 4
    assert ms.kolmogorov_norm(ms.dirac(0) - ms.dirac(1)) == 1
    F = ms.from_atoms([(0, 0.2), (3, 0.8)])
    assert ms.total_variation(F) == pytest.approx(1) and ms.kolmogorov_norm(F) == pytest.approx(1)
    assert ms.kolmogorov_distance(F, F) == 0


def test_binomial_vs_poisson_distance():
    Bin = ms.bernoulli(0.1) ** 2
    P = ms.exp_measure(0.2 * (ms.dirac(1) - ms.dirac(0)))
    d = ms.kolmogorov_distance(Bin, P)
    ref = kolmogorov_gap(measure_as_dict(Bin), measure_as_dict(P))
    assert d == pytest.approx(ref, abs=1e-15)
    assert d == pytest.approx(8.731e-3, abs=1e-6)


def test_cdf():
    assert ms.cdf(ms.dirac(0), -1) == 0
    assert ms.cdf(ms.dirac(0), 0) == 1
    assert ms.cdf(ms.bernoulli(0.3), 0.5) == pytest.approx(0.7)
    assert ms.cdf(ms.dirac(1) - ms.dirac(0), 0) == -1
    np.testing.assert_allclose(ms.cdf(ms.bernoulli(0.3), [-1, 0, 2]), [0, 0.7, 1])


def test_concentration():
    assert ms.concentration(ms.dirac(3.3), 0) == 1
    assert ms.concentration(ms.dirac(3.3), 7) == 1
    U = ms.from_atoms([(k, 0.25) for k in range(4)])
    assert ms.concentration(U, 1) == pytest.approx(0.5)
    P = ms.exp_measure(0.2 * (ms.dirac(1) - ms.dirac(0)))
    assert ms.concentration(P, 0.5) == pytest.approx(math.exp(-0.2), abs=1e-15)
    with pytest.raises(DomainError):
        ms.concentration(ms.dirac(1) - ms.dirac(0), 1)
    with pytest.raises(InputError):
        ms.concentration(U, -1)


def test_concentration_window_is_closed_with_irrational_ends():
    F = ms.from_atoms([(0, 0.5), (SQRT2, 0.5)])
    assert ms.concentration(F, SQRT2) == pytest.approx(1.0)


def test_charfn():
    t = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(ms.charfn(ms.dirac(0), t), 1)
    np.testing.assert_allclose(ms.charfn(ms.dirac(2.5), t), np.exp(2.5j * t))
    assert abs(ms.charfn(ms.bernoulli(0.5), math.pi)) < 1e-15


# -- serialization -------------------------------------------------------------


def test_json_round_trip():
    M = ms.from_atoms([(-1.25, 0.3), (SQRT2, -0.7)])
    back = SignedMeasure.from_json(M.to_json())
    np.testing.assert_array_equal(back.locations, M.locations)
    np.testing.assert_array_equal(back.masses, M.masses)
    assert back.merge_tolerance == M.merge_tolerance


# -- properties --------------------------------------------------------------------

atoms = st.lists(
    st.tuples(st.integers(-6, 6), st.floats(-2, 2, allow_nan=False)), min_size=1, max_size=6
)


def _measure(pairs):
    return ms.from_atoms([(float(x), m) for x, m in pairs])


@settings(max_examples=60, deadline=None)
@given(atoms, atoms, atoms)
def test_convolution_algebra(a, b, c):
    A, B, C = _measure(a), _measure(b), _measure(c)
    scale = (1 + ms.total_variation(A)) * (1 + ms.total_variation(B)) * (1 + ms.total_variation(C))
    assert ms.tv_distance(A * B, B * A) <= 1e-12 * scale
    assert ms.tv_distance((A * B) * C, A * (B * C)) <= 1e-12 * scale
    assert ms.tv_distance(A * (B + C), A * B + A * C) <= 1e-12 * scale
    assert ms.total_variation(A * B) <= ms.total_variation(A) * ms.total_variation(B) * (1 + 1e-12) + 1e-14
    assert ms.kolmogorov_norm(A * B) <= ms.kolmogorov_norm(A) * ms.total_variation(B) * (1 + 1e-12) + 1e-14


@settings(max_examples=60, deadline=None)
@given(atoms, atoms)
def test_charfn_multiplicative(a, b):
    A, B = _measure(a), _measure(b)
    t = np.linspace(-7, 7, 100)
    scale = (1 + ms.total_variation(A)) * (1 + ms.total_variation(B))
    err = np.abs(ms.charfn(A * B, t) - ms.charfn(A, t) * ms.charfn(B, t)).max()
    assert err <= 1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6),
       st.lists(st.integers(-4, 4), min_size=6, max_size=6),
       st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_concentration_bounds_and_monotone(w, xs, h1, h2):
    F = ms.from_atoms([(float(x), m / sum(w)) for x, m in zip(xs, w)])
    lo, hi = sorted((h1, h2))
    assert max(F.masses) - 1e-12 <= ms.concentration(F, lo) <= ms.concentration(F, hi) + 1e-12
    assert ms.concentration(F, hi) <= 1 + 1e-12
