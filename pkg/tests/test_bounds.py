import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpsmooth import approximants as ap
from cpsmooth import bounds as bd
from cpsmooth import measure as ms
from cpsmooth import random_instances as ri
from cpsmooth.blocks import GeneralJump, IIDLattice, TwoRuns, block_moments, weighted_sum_distribution
from cpsmooth.errors import DomainError, InputError, NumericError, PreconditionError

from oracles import measure_as_dict, window_mass

SQRT2 = math.sqrt(2)


# -- conditions ------------------------------------------------------------------


def test_theorem1_conditions_examples():
    rep = bd.check_conditions("theorem1", [TwoRuns(0.05, 50)])
    assert rep.passed
    cov = next(r for r in rep.records if "Cov" in r.name)
    assert cov.lhs == pytest.approx(49 * (0.05**3 - 0.05**4))
    assert cov.rhs == pytest.approx(6.25e-3)
    bad = bd.check_conditions("theorem1", [TwoRuns(0.2, 50)])
    assert not bad.passed
    assert any("nu1" in r.name and r.lhs == pytest.approx(0.04) for r in bad.failures())


def test_franken_condition_failure():
    rep = bd.check_conditions("theorem2", [IIDLattice((0.65, 0.2, 0.15), 10)])
    assert not rep.passed
    assert rep.failures()[0].lhs == pytest.approx(-0.05)


def test_condition_kind_mismatch_is_reported_not_raised():
    rep = bd.check_conditions("theorem3", [TwoRuns(0.1, 5)])
    assert not rep.passed
    with pytest.raises(InputError):
        bd.check_conditions("theorem99", [TwoRuns(0.1, 5)])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.001, 0.3), st.floats(0.1, 1.0), st.integers(2, 300))
def test_theorem1_conditions_monotone_in_p(p, shrink, n):
    # shrinking p never turns a passing two-runs block into a failing one
    if bd.check_conditions("theorem1", [TwoRuns(p, n)]).passed:
        assert bd.check_conditions("theorem1", [TwoRuns(p * shrink, n)]).passed


# -- shapes ------------------------------------------------------------------------


def test_corollary1_example():
    blocks = [IIDLattice((0.9, 0.1), 100), IIDLattice((0.9, 0.1), 100)]
    s = bd.bound_shape("corollary1", blocks)
    assert s.total == pytest.approx(2 * min(1, 0.31623) / math.sqrt(20), abs=1e-5)
    assert s.total == pytest.approx(0.14142, abs=1e-5)
    assert s.constant_policy["set_to_1"] == ["C"]


def test_theorem1_pi_shape_formula():
    b = TwoRuns(0.05, 50)
    s = bd.bound_shape("theorem1_pi", [b], h=0.5)
    mo = block_moments(b)
    Q = ms.concentration(ap.build_smoothing("M1", [b]), 0.5)
    expected = Q * mo.R0 * (2 * min(1, mo.Gamma1**-0.5) + min(1, 1 / mo.Gamma1))
    assert s.total == pytest.approx(expected, rel=1e-14)
    assert s.smoothing_Q == Q and s.q_factored


def test_theorem3_degenerate_min_factors():
    B = ms.from_atoms([(1, 0.3), (SQRT2, 0.7)])
    b = GeneralJump(0.4, B, 1)
    h = 0.5
    s = bd.bound_shape("theorem3_first", [b], h=h)
    Q = ms.concentration(ap.build_smoothing("M3", [b]), h)
    assert s.total == pytest.approx(Q * 0.16 * (B.abs_moment(1) / h + 1), rel=1e-14)


def test_magic_shape_example():
    blocks = [IIDLattice((0.9, 0.1), 100)]
    assert bd.bound_shape("magic", blocks).total == pytest.approx(1 / math.sqrt(10))


@pytest.mark.parametrize("variant,blocks", [
    ("theorem1_pi", [TwoRuns(0.03, 40), TwoRuns(0.02, 70, 2.0)]),
    ("theorem1_g", [TwoRuns(0.03, 40), TwoRuns(0.02, 70, 2.0)]),
    ("theorem2_first", [IIDLattice((0.7, 0.25, 0.05), 12)]),
    ("theorem2_second", [IIDLattice((0.7, 0.25, 0.05), 12, SQRT2)]),
    ("theorem3_first", [GeneralJump(0.2, ms.from_atoms([(1, 0.5), (SQRT2, 0.5)]), 6)]),
    ("theorem3_second", [GeneralJump(0.2, ms.from_atoms([(1, 0.5), (SQRT2, 0.5)]), 6)]),
    ("corollary1", [IIDLattice((0.8, 0.2), 30)]),
    ("fe", [TwoRuns(0.05, 50), TwoRuns(0.05, 100)]),
    ("oho", [TwoRuns(0.05, 50), TwoRuns(0.05, 100)]),
    ("az", [IIDLattice((0.8, 0.2), 30)]),
    ("berry_esseen", [IIDLattice((0.8, 0.2), 30)]),
    ("roos_hipp", [GeneralJump(0.2, ms.dirac(1.0), 3)]),
])
def test_breakdown_invariant(variant, blocks):
    s = bd.bound_shape(variant, blocks)
    assert s.total == pytest.approx(s.smoothing_Q * s.breakdown_sum, abs=1e-12)
    assert s.total >= 0
    assert len(s.breakdown) == len(blocks)


def test_gamma1_policy_switch():
    # Gamma1 = 0.75 per block, 1.5 in total: only the global reading leaves min(1, .) unsaturated
    blocks = [TwoRuns(0.05, 300), TwoRuns(0.05, 300)]
    per = bd.bound_shape("theorem1_pi", blocks, gamma1_policy="per-block")
    glob = bd.bound_shape("theorem1_pi", blocks, gamma1_policy="global")
    assert glob.total < per.total
    assert "gamma1 reading: global" in glob.notes
    with pytest.raises(InputError):
        bd.bound_shape("theorem1_pi", blocks, gamma1_policy="other")


def test_berry_esseen_is_labelled_for_dependent_blocks():
    s = bd.bound_shape("berry_esseen", [TwoRuns(0.1, 20)])
    assert any("reference shape only" in n for n in s.notes)


def test_shape_domain_errors():
    with pytest.raises(DomainError):
        bd.bound_shape("theorem2_first", [IIDLattice((0.65, 0.2, 0.15), 10)])
    with pytest.raises(DomainError):
        bd.bound_shape("theorem1_pi", [GeneralJump(0.1, ms.dirac(1.0), 3)])
    with pytest.raises(InputError):
        bd.bound_shape("nope", [TwoRuns(0.1, 3)])
    with pytest.raises(InputError):
        bd.bound_shape("theorem1_pi", [TwoRuns(0.1, 3)], h=0.0)


@pytest.mark.parametrize("h_lo,h_hi", [(0.1, 0.3), (0.2, 0.9), (1.0, 1.9)])
def test_shape_nonincreasing_in_h_while_window_count_fixed(h_lo, h_hi):
    # Q(M1, h) is constant for h between lattice points, so only the 1/h terms move
    blocks = [TwoRuns(0.05, 80), TwoRuns(0.04, 60)]
    lo = bd.bound_shape("theorem1_pi", blocks, h=h_lo)
    hi = bd.bound_shape("theorem1_pi", blocks, h=h_hi)
    assert lo.smoothing_Q == hi.smoothing_Q
    assert hi.total <= lo.total


def test_shape_ratio_stable_under_block_scaling():
    # doubling every n_m with fixed p changes the Theorem 1 shape by a bounded factor
    a = bd.bound_shape("theorem1_pi", [TwoRuns(0.05, 100), TwoRuns(0.05, 100)])
    b = bd.bound_shape("theorem1_pi", [TwoRuns(0.05, 200), TwoRuns(0.05, 200)])
    assert 0.25 < b.total / a.total < 4


# -- explicit Roos-Hipp bound ---------------------------------------------------------


def test_roos_hipp_single_summand_closed_form():
    s = bd.bound_roos_hipp([GeneralJump(0.5, ms.dirac(1.0), 1)])
    expected = (math.pi**2 / 4) * (0.25 / 0.5) * math.exp(-0.125) * 1.125
    assert s.total == pytest.approx(expected, rel=1e-14)
    assert s.total == pytest.approx(1.2248290284885914, rel=1e-12)
    assert s.constant_policy["set_to_1"] == []


def test_roos_hipp_zero_p():
    assert bd.bound_roos_hipp([GeneralJump(0.0, ms.dirac(1.0), 3)]).total == 0


def test_roos_hipp_expansion_invariance():
    B = ms.from_atoms([(1, 0.4), (SQRT2, 0.6)])
    one = bd.bound_roos_hipp([GeneralJump(0.3, B, 2)])
    two = bd.bound_roos_hipp([GeneralJump(0.3, B, 1), GeneralJump(0.3, B, 1)])
    assert one.total == pytest.approx(two.total, rel=1e-14)


def test_roos_hipp_conditions():
    with pytest.raises(DomainError):
        bd.bound_roos_hipp([GeneralJump(0.3, ms.from_atoms([(-1, 1.0)]), 2)])


@pytest.mark.parametrize("seed", range(10))
def test_roos_hipp_dominates(seed):
    rng = np.random.default_rng(seed)
    blocks = ri.random_roos_hipp_blocks(rng)
    F = weighted_sum_distribution(blocks)
    A = ap.build_theorem3(blocks, 1)
    s = bd.bound_roos_hipp(blocks)
    assert ms.kolmogorov_distance(F, A) <= s.total


def test_compare_identical_gives_zero_ratio():
    b = [TwoRuns(0.05, 20)]
    F = weighted_sum_distribution(b)
    rep = bd.compare(F, F, bd.bound_shape("theorem1_g", b))
    assert rep.measured_distance == 0 and rep.ratio == 0


def test_compare_binomial_poisson():
    b = [IIDLattice((0.9, 0.1), 2)]
    rep = bd.compare(weighted_sum_distribution(b), ap.build_pi(b), bd.bound_shape("magic", b))
    assert rep.measured_distance == pytest.approx(8.731e-3, abs=1e-6)


def test_kolmogorov_to_normal():
    F = ms.from_atoms([(-1, 0.5), (1, 0.5)])
    assert bd.kolmogorov_to_normal(F) == pytest.approx(0.5 - 0.5 + 0.5 - 0.1586552539314571, abs=1e-12)


# -- validators ------------------------------------------------------------------------


@pytest.mark.parametrize("h", [0.25, 1.0, 3.0])
def test_lemma_ac_dirac(h):
    ac1, ac3, ac4, ac5 = bd.validate_lemma_ac(ms.dirac(0.0), h, h)
    assert ac1.lhs == 1
    assert ac1.rhs == pytest.approx(2 * (96 / 95) ** 2, rel=1e-6)
    assert ac3.rhs == pytest.approx(2 * ac3.lhs)
    assert ac1.passed and ac3.passed
    assert ac4.hard is False and ac5.hard is False


def test_lemma_ac_poisson5():
    F = ms.exp_measure(5 * (ms.dirac(1) - ms.dirac(0)))
    recs = bd.validate_lemma_ac(F, 0.5, 1.0)
    assert [r.check for r in recs] == ["lemma1.ac1", "lemma1.ac3", "lemma1.ac4", "lemma1.ac5"]
    assert recs[0].passed and recs[1].passed
    assert all(math.isfinite(r.ratio) for r in recs[2:])
    assert recs[0].lhs == pytest.approx(window_mass(measure_as_dict(F), 0.5))


def test_lemma_ac_rejects_signed():
    with pytest.raises(DomainError):
        bd.validate_lemma_ac(ms.dirac(1) - ms.dirac(0), 1, 1)


def test_presman_examples():
    r = bd.validate_presman(ms.dirac(0.0), 1.0, 0.0)
    assert r.lhs == 1
    assert r.rhs == pytest.approx(math.pi + 1, rel=1e-6)
    r2 = bd.validate_presman(ms.dirac(1) - ms.dirac(0), 1.0, 0.5)
    assert r2.passed and r2.margin > 0
    with pytest.raises(DomainError):
        bd.validate_presman(ms.dirac(0.5), 1.0, 0.0)


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_presman_random(seed, gamma):
    rng = np.random.default_rng(seed)
    M = ri.random_integer_signed_measure(rng)
    assert bd.validate_presman(M, gamma, float(rng.uniform(-3, 3))).passed


def test_charfn_bound_examples():
    b = TwoRuns(0.05, 50)
    recs = bd.validate_charfn_bound(b, np.linspace(-math.pi, math.pi, 400))
    assert [r.check for r in recs] == ["lemma6.glb1.F", "lemma6.glb1.G", "lemma6.glb1.Pi"]
    assert all(r.passed for r in recs)
    at0 = bd.validate_charfn_bound(b, [0.0])
    for r in at0:
        assert r.lhs == pytest.approx(1.0, abs=1e-12) and r.rhs == 1.0
    with pytest.raises(PreconditionError):
        bd.validate_charfn_bound(TwoRuns(0.2, 50), [0.0])


def test_pi_charfn_closed_form():
    # exp{G(cos t - 1)} <= exp{-0.26 G 2 sin^2(t/2)} since cos t - 1 = -2 sin^2(t/2) and 2 >= 0.52
    b = TwoRuns(0.04, 100)
    t = np.linspace(-math.pi, math.pi, 101)
    g = block_moments(b).Gamma1
    closed = np.exp(g * (np.cos(t) - 1))
    np.testing.assert_allclose(np.abs(ms.charfn(ap.build_pi([b]), t)), closed, atol=1e-13)


def test_validation_record_serializes():
    r = bd.validate_presman(ms.dirac(0.0), 1.0, 0.0)
    d = json.loads(r.to_json())
    assert set(d) == {"check", "inputs", "lhs", "rhs", "margin", "pass"}
    ac4 = bd.validate_lemma_ac(ms.bernoulli(0.4), 0.5, 1.0)[2]
    assert "ratio" in ac4.to_dict()


def test_simpson():
    assert bd.simpson(np.cos, 0, math.pi / 2) == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(NumericError):
        bd.simpson(lambda x: np.sin(1e5 * x**2), 0, 10, rtol=1e-12, max_n=1024)
