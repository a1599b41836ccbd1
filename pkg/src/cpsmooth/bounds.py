"""Hypothesis checks, bound shapes, distance reports and inequality validators.

Bound *shapes* evaluate the right-hand side of each approximation bound with
every unspecified absolute constant set to 1. Explicit constants that are
part of a statement (``pi^2/4``, ``(96/95)^2``, ``0.26``, the Presman factor)
are kept, and only those checks are asserted as hard inequalities.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from . import approximants as ap
from . import measure as ms
from .blocks import (
    BlockSpec,
    GeneralJump,
    IIDLattice,
    LatentDriver,
    TwoRuns,
    block_distribution,
    block_moments,
)
from .errors import DomainError, InputError, NumericError, PreconditionError
from .measure import SignedMeasure

THEOREM_IDS = ("theorem1", "theorem2", "corollary1", "theorem3", "roos_hipp")

Q_FACTORED = {
    "theorem1_pi": "M1",
    "theorem1_g": "M1",
    "theorem2_first": "M2",
    "theorem2_second": "M2",
    "theorem3_first": "M3",
    "theorem3_second": "M3",
}
H_FREE = ("corollary1", "fe", "oho", "magic", "az", "berry_esseen", "roos_hipp")
VARIANTS = tuple(Q_FACTORED) + H_FREE

# block kinds each variant is defined for
_LATTICE = ("two_runs", "iid_lattice", "latent_driver")
_BERNOULLI = ("two_runs", "iid_lattice", "general_jump")
VARIANT_KINDS = {
    "theorem1_pi": _LATTICE,
    "theorem1_g": _LATTICE,
    "theorem2_first": ("iid_lattice",),
    "theorem2_second": ("iid_lattice",),
    "theorem3_first": ("general_jump",),
    "theorem3_second": ("general_jump",),
    "corollary1": ("iid_lattice",),
    "fe": ("two_runs",),
    "oho": ("two_runs",),
    "magic": _BERNOULLI,
    "az": _BERNOULLI,
    "berry_esseen": _LATTICE + ("general_jump",),
    "roos_hipp": ("iid_lattice", "general_jump"),
}

# approximant each variant bounds the distance to
VARIANT_APPROXIMANT = {
    "theorem1_pi": "pi",
    "theorem1_g": "g",
    "theorem2_first": "pi",
    "theorem2_second": "franken_second",
    "theorem3_first": "theorem3_first",
    "theorem3_second": "theorem3_second",
    "corollary1": "pi",
    "fe": "g",
    "oho": "g",
    "magic": "pi",
    "az": "accompanying",
    "roos_hipp": "accompanying",
    "berry_esseen": "normal",
}

GAMMA1_POLICIES = ("per-block", "global")
QUAD_RTOL = 1e-6


# -- conditions -------------------------------------------------------------


@dataclass
class ConditionRecord:
    name: str
    relation: str
    lhs: float
    rhs: float
    passed: bool
    block: int | None = None


@dataclass
class ConditionReport:
    theorem_id: str
    records: list[ConditionRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def add(self, name, relation, lhs, rhs, block=None):
        lhs, rhs = float(lhs), float(rhs)
        ok = {
            "<=": lhs <= rhs,
            "<": lhs < rhs,
            ">": lhs > rhs,
            ">=": lhs >= rhs,
            "==": lhs == rhs,
        }[relation]
        self.records.append(ConditionRecord(name, relation, lhs, rhs, bool(ok), block))

    def failures(self) -> list[ConditionRecord]:
        return [r for r in self.records if not r.passed]


def _kind_mismatch(report, i, need):
    report.records.append(ConditionRecord(f"block kind is {need}", "==", 0.0, 1.0, False, i))


def check_conditions(theorem_id: str, blocks: Sequence[BlockSpec]) -> ConditionReport:
    """Evaluate every hypothesis of a theorem; failures are reported, not raised."""
    if theorem_id not in THEOREM_IDS:
        raise InputError(f"unknown theorem id {theorem_id!r}; choose from {THEOREM_IDS}")
    rep = ConditionReport(theorem_id)
    for i, b in enumerate(blocks):
        if theorem_id == "theorem1":
            if isinstance(b, GeneralJump):
                _kind_mismatch(rep, i, "integer-valued")
                continue
            mo = block_moments(b)
            rep.add("max_k nu1(k) <= 1/100", "<=", mo.nu1.max(), 0.01, i)
            rep.add("max_k [nu2(k) - nu1(k)] <= 0", "<=", (mo.nu2 - mo.nu1).max(), 0.0, i)
            rep.add("max_k nu3(k) < inf", "<", mo.nu3.max(), math.inf, i)
            rep.add("sum_k nu2(k) <= Gamma1/20", "<=", mo.nu2.sum(), mo.Gamma1 / 20, i)
            rep.add(
                "sum_k |Cov(X_{k-1}, X_k)| <= Gamma1/20", "<=",
                np.abs(mo.cov_adjacent).sum(), mo.Gamma1 / 20, i,
            )
        elif theorem_id == "theorem2":
            if not isinstance(b, IIDLattice):
                _kind_mismatch(rep, i, "iid_lattice")
                continue
            mo = block_moments(b)
            rep.add("lambda = nu1 - nu1^2 - nu2 > 0", ">", mo.lam, 0.0, i)
            rep.add("nu3 < inf", "<", mo.summand_nu[2], math.inf, i)
        elif theorem_id == "corollary1":
            if not (isinstance(b, IIDLattice) and len(b.pmf) <= 2):
                _kind_mismatch(rep, i, "Bernoulli iid_lattice")
                continue
            rep.add("p < 1", "<", _bernoulli_p(b), 1.0, i)
        elif theorem_id in ("theorem3", "roos_hipp"):
            if not isinstance(b, GeneralJump):
                _kind_mismatch(rep, i, "general_jump")
                continue
            rep.add("p >= 0", ">=", b.p, 0.0, i)
            rep.add("p < 1", "<", b.p, 1.0, i)
            if theorem_id == "theorem3":
                rep.add("mu1 < inf", "<", block_moments(b).mu1, math.inf, i)
            else:
                rep.add("min supp B > 0", ">", b.scaled_jump.locations.min(), 0.0, i)
    return rep


# -- shapes -----------------------------------------------------------------


@dataclass
class BoundShape:
    variant: str
    h: float | None
    total: float
    breakdown: list[tuple[int, float]]
    smoothing_Q: float
    constant_policy: dict
    q_factored: bool
    notes: list[str] = field(default_factory=list)

    @property
    def breakdown_sum(self) -> float:
        return float(sum(c for _, c in self.breakdown))


def default_h(blocks: Sequence[BlockSpec]) -> float:
    """Half the smallest absolute block weight."""
    return min(abs(b.weight) for b in blocks) / 2


def _bernoulli_p(b) -> float:
    if isinstance(b, TwoRuns):
        return b.p
    if isinstance(b, GeneralJump):
        return b.p
    if isinstance(b, IIDLattice) and len(b.pmf) <= 2:
        return b.pmf[1] if len(b.pmf) == 2 else 0.0
    raise DomainError(f"block {b!r} is not a Bernoulli-type block")


def _inv_pow(x, a):
    """``min(1, x^-a)`` with ``x = 0`` giving 1."""
    return 1.0 if x <= 0 else min(1.0, x ** (-a))


def _unit_constants(names, explicit=None):
    return {"set_to_1": list(names), "explicit": dict(explicit or {})}


def _q_factored_terms(variant, blocks, h, gamma1_policy, notes):
    moms = [block_moments(b) for b in blocks]
    terms = []
    if variant in ("theorem1_pi", "theorem1_g"):
        for b in blocks:
            if isinstance(b, GeneralJump):
                raise DomainError(f"{variant} needs integer-valued blocks")
        total_gamma = sum(m.Gamma1 for m in moms)
        notes.append(f"gamma1 reading: {gamma1_policy}")
        for b, m in zip(blocks, moms):
            g = m.Gamma1 if gamma1_policy == "per-block" else total_gamma
            w = abs(b.weight)
            if variant == "theorem1_pi":
                terms.append(m.R0 * (w / h * _inv_pow(m.Gamma1, 0.5) + _inv_pow(g, 1.0)))
            else:
                terms.append(m.R1 * (w / h * _inv_pow(m.Gamma1, 1.0) + _inv_pow(g, 1.5)))
    elif variant in ("theorem2_first", "theorem2_second"):
        for b, m in zip(blocks, moms):
            if not isinstance(b, IIDLattice):
                raise DomainError(f"{variant} needs iid_lattice blocks")
            nu1, nu2, _ = m.summand_nu
            lam = m.lam
            if not lam > 0:
                raise DomainError(f"{variant} divides by lambda; got lambda={lam!r}")
            n, w = b.length, abs(b.weight)
            nl = n * lam
            tail = 1 + nu1 / lam
            if variant == "theorem2_first":
                terms.append(n * (nu2 + nu1**2) * (w / h * _inv_pow(nl, 0.5) + _inv_pow(nl, 1.0) * tail))
            else:
                terms.append(n * m.r1 * (w / h * _inv_pow(nl, 1.0) + _inv_pow(nl, 1.5) * tail))
    else:
        for b, m in zip(blocks, moms):
            if not isinstance(b, GeneralJump):
                raise DomainError(f"{variant} needs general_jump blocks")
            n, p = b.length, b.p
            lam = n * p
            if variant == "theorem3_first":
                terms.append(n * p**2 * (m.mu1 / h * _inv_pow(lam, 0.5) + _inv_pow(lam, 1.0)))
            else:
                terms.append(n * p**3 * (m.mu1 / h * _inv_pow(lam, 1.0) + _inv_pow(lam, 1.5)))
    return terms


def _summand_law(b) -> SignedMeasure:
    """Marginal law of one weighted summand."""
    if isinstance(b, TwoRuns):
        b = b.as_latent()
    if isinstance(b, LatentDriver):
        one = LatentDriver(b.driver_support, b.driver_pmf, b.link, 1, b.weight)
        return block_distribution(one)
    return ms.scale_support(b.summand_law(), b.weight)


def _berry_esseen_terms(blocks, notes):
    terms, var = [], 0.0
    for b in blocks:
        law = _summand_law(b)
        mu = law.mean()
        s2 = float(np.dot((law.locations - mu) ** 2, law.masses))
        b3 = float(np.dot(np.abs(law.locations - mu) ** 3, law.masses))
        terms.append(b.length * b3)
        var += b.length * s2
    if any(isinstance(b, (TwoRuns, LatentDriver)) for b in blocks):
        notes.append("reference shape only: summands are dependent")
    factor = var ** -1.5 if var > 0 else math.inf
    return terms, factor


def bound_shape(
    variant: str,
    blocks: Sequence[BlockSpec],
    h: float | None = None,
    gamma1_policy: str = "per-block",
    series_tol: float = ms.DEFAULT_SERIES_TOL,
) -> BoundShape:
    """Right-hand side of a bound with unknown absolute constants set to 1."""
    if variant not in VARIANTS:
        raise InputError(f"unknown bound variant {variant!r}; choose from {VARIANTS}")
    if gamma1_policy not in GAMMA1_POLICIES:
        raise InputError(f"unknown gamma1 policy {gamma1_policy!r}")
    if not blocks:
        raise InputError("at least one block is required")
    notes: list[str] = []

    if variant in Q_FACTORED:
        h = default_h(blocks) if h is None else float(h)
        if not h > 0:
            raise InputError("h must be positive")
        terms = _q_factored_terms(variant, blocks, h, gamma1_policy, notes)
        M = ap.build_smoothing(Q_FACTORED[variant], blocks, series_tol)
        Q = ms.concentration(M, h)
        const = {"theorem1_pi": "C2", "theorem1_g": "C3", "theorem2_first": "C4",
                 "theorem2_second": "C5", "theorem3_first": "C8", "theorem3_second": "C9"}[variant]
        return BoundShape(
            variant, h, Q * float(sum(terms)), list(enumerate(terms)), Q,
            _unit_constants([const]), True, notes,
        )

    if variant == "roos_hipp":
        return bound_roos_hipp(blocks, series_tol)

    if variant == "corollary1":
        ps = [_bernoulli_p(b) for b in blocks]
        terms = [min(b.length * p**2, math.sqrt(b.length) * p**1.5) for b, p in zip(blocks, ps)]
        mass = sum(b.length * p for b, p in zip(blocks, ps))
        factor = mass**-0.5 if mass > 0 else 0.0
        policy = _unit_constants(["C"])
    elif variant in ("fe", "oho"):
        for b in blocks:
            if not isinstance(b, TwoRuns):
                raise DomainError(f"{variant} is defined for two-runs blocks")
        if variant == "fe":
            terms = [b.p / math.sqrt(b.length) for b in blocks]
            factor = 1.0
        else:
            terms = [b.p**2 for b in blocks]
            s = sum(b.length * b.p**2 for b in blocks)
            factor = s**-0.5 if s > 0 else 0.0
        policy = _unit_constants(["C"])
    elif variant == "magic":
        ps = [_bernoulli_p(b) for b in blocks]
        terms = [b.length * p**2 for b, p in zip(blocks, ps)]
        mass = sum(b.length * p for b, p in zip(blocks, ps))
        factor = mass**-0.5 if mass > 0 else 0.0
        policy = _unit_constants(["C"])
    elif variant == "az":
        # min(sum p^2, max p) == min(1, max p / sum p^2) * sum p^2
        ps = [_bernoulli_p(b) for b in blocks]
        terms = [b.length * p**2 for b, p in zip(blocks, ps)]
        s2 = sum(terms)
        factor = min(1.0, max(ps) / s2) if s2 > 0 else 0.0
        policy = _unit_constants(["C"])
        notes.append("no smoothing: min(sum p_i^2, max p_i)")
    else:  # berry_esseen
        terms, factor = _berry_esseen_terms(blocks, notes)
        policy = _unit_constants(["C1"])
    return BoundShape(
        variant, None, factor * float(sum(terms)), list(enumerate(terms)), factor,
        policy, False, notes,
    )


def as_general_jump(b: BlockSpec) -> BlockSpec:
    """Bernoulli lattice blocks rewritten as ``(1-p) δ + p δ_1``; others unchanged."""
    if isinstance(b, IIDLattice) and len(b.pmf) <= 2:
        return GeneralJump(_bernoulli_p(b), ms.dirac(1.0), b.length, b.weight)
    return b


def bound_roos_hipp(
    blocks: Sequence[BlockSpec], series_tol: float = ms.DEFAULT_SERIES_TOL
) -> BoundShape:
    """Fully explicit bound ``pi^2/4 sum_i p_i^2/(1-p_i) Q(H~, mu_i)``.

    Each block stands for ``n_m`` identical summands; the breakdown holds one
    entry per block (the sum over its summands).
    """
    blocks = [as_general_jump(b) for b in blocks]
    rep = check_conditions("roos_hipp", blocks)
    if not rep.passed:
        bad = "; ".join(f"block {r.block}: {r.name}" for r in rep.failures())
        raise DomainError(f"Roos-Hipp conditions violated: {bad}")
    H = ap.build_smoothing("HTILDE", blocks, series_tol)
    terms = []
    for b in blocks:
        if b.p == 0:
            terms.append(0.0)
            continue
        mu = b.scaled_jump.mean()
        terms.append(b.length * (math.pi**2 / 4) * b.p**2 / (1 - b.p) * ms.concentration(H, mu))
    return BoundShape(
        "roos_hipp", None, float(sum(terms)), list(enumerate(terms)), 1.0,
        _unit_constants([], {"pi^2/4": math.pi**2 / 4}), False,
        ["per-summand concentration windows mu_i"],
    )


# -- approximants and comparison -------------------------------------------


def build_approximant(name: str, blocks: Sequence[BlockSpec], series_tol=ms.DEFAULT_SERIES_TOL):
    if name == "pi":
        return ap.build_pi(blocks, series_tol)
    if name == "g":
        return ap.build_g(blocks, series_tol)
    if name == "franken_second":
        return ap.build_franken_second(blocks, series_tol)
    if name in ("theorem3_first", "accompanying") and all(isinstance(b, GeneralJump) for b in blocks):
        return ap.build_theorem3(blocks, 1, series_tol)
    if name == "accompanying":
        return ap.build_pi(blocks, series_tol)
    if name == "theorem3_second":
        return ap.build_theorem3(blocks, 2, series_tol)
    raise InputError(f"unknown approximant {name!r}")


def kolmogorov_to_normal(F: SignedMeasure) -> float:
    """``sup_x |F(x) - Phi((x - mean)/sd)|`` for the moment-matched normal law."""
    mu = F.mean()
    sd = math.sqrt(float(np.dot((F.locations - mu) ** 2, F.masses)))
    if sd == 0:
        return 1.0
    phi = special.ndtr((F.locations - mu) / sd)
    cs = np.cumsum(F.masses)
    right = np.abs(cs - phi)
    left = np.abs(np.concatenate(([0.0], cs[:-1])) - phi)
    return float(max(right.max(), left.max()))


@dataclass
class BoundReport:
    measured_distance: float
    shape: BoundShape
    ratio: float
    conditions: ConditionReport | None = None


def compare(
    exact: SignedMeasure,
    approximant: SignedMeasure,
    shape: BoundShape,
    conditions: ConditionReport | None = None,
) -> BoundReport:
    d = ms.kolmogorov_distance(exact, approximant)
    if shape.total > 0:
        ratio = d / shape.total
    else:
        ratio = 0.0 if d == 0 else math.inf
    return BoundReport(d, shape, ratio, conditions)


# -- validators -------------------------------------------------------------


@dataclass
class ValidationRecord:
    check: str
    inputs: dict
    lhs: float
    rhs: float
    margin: float
    passed: bool
    ratio: float | None = None
    hard: bool = True

    def to_dict(self) -> dict:
        d = {
            "check": self.check, "inputs": self.inputs, "lhs": self.lhs,
            "rhs": self.rhs, "margin": self.margin, "pass": self.passed,
        }
        if self.ratio is not None:
            d["ratio"] = self.ratio
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def simpson(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
            rtol: float = QUAD_RTOL, n0: int = 256, max_n: int = 2**20) -> float:
    """Composite Simpson rule, doubled until two refinements agree to ``rtol``."""
    n = n0
    x = np.linspace(a, b, n + 1)
    prev = integrate.simpson(f(x), x=x)
    while n < max_n:
        n *= 2
        x = np.linspace(a, b, n + 1)
        cur = integrate.simpson(f(x), x=x)
        if abs(cur - prev) <= rtol * abs(cur) or abs(cur - prev) < 1e-300:
            return float(cur)
        prev = cur
    raise NumericError(f"quadrature on [{a}, {b}] did not converge to rtol={rtol}")


def _abs_charfn_integral(F, h, rtol):
    return simpson(lambda t: np.abs(ms.charfn(F, t)), -1.0 / h, 1.0 / h, rtol)


def validate_lemma_ac(F: SignedMeasure, h: float, a: float, rtol: float = QUAD_RTOL):
    """Concentration-function inequalities for a distribution ``F``.

    Returns four records: ``ac1`` and ``ac3`` are hard inequalities with
    their explicit constants; ``ac4`` and ``ac5`` carry the empirical ratio
    ``lhs / rhs`` (their constant is unknown).
    """
    if not F.is_distribution(1e-9):
        raise DomainError("lemma validators need a probability distribution")
    if not (h > 0 and a > 0):
        raise InputError("h and a must be positive")
    inputs = {"h": h, "a": a, "atoms": len(F)}
    Qh, Qa = ms.concentration(F, h), ms.concentration(F, a)

    rhs1 = (96 / 95) ** 2 * h * _abs_charfn_integral(F, h, rtol)
    rec1 = ValidationRecord("lemma1.ac1", inputs, Qh, rhs1, rhs1 - Qh, Qh <= rhs1)
    rhs3 = (1 + h / a) * Qa
    rec3 = ValidationRecord("lemma1.ac3", inputs, Qh, rhs3, rhs3 - Qh, Qh <= rhs3)

    cp = ms.exp_measure(a * (F - ms.dirac(0.0)))
    tail = float(F.masses[np.abs(F.locations) > h].sum())
    lhs4 = ms.concentration(cp, h)
    rhs4 = 1 / math.sqrt(a * tail) if tail > 0 else math.inf
    ratio4 = lhs4 * math.sqrt(a * tail)
    rec4 = ValidationRecord(
        "lemma1.ac4", inputs, lhs4, rhs4, rhs4 - lhs4, math.isfinite(ratio4), ratio4, hard=False
    )

    G, how = _nonnegative_charfn_version(F)
    lhs5 = h * _abs_charfn_integral(G, h, rtol)
    rhs5 = ms.concentration(G, h)
    ratio5 = lhs5 / rhs5
    rec5 = ValidationRecord(
        "lemma1.ac5", dict(inputs, measure=how), lhs5, rhs5, rhs5 - lhs5,
        math.isfinite(ratio5), ratio5, hard=False,
    )
    return [rec1, rec3, rec4, rec5]


def _nonnegative_charfn_version(F):
    """``F`` itself if its charfn is real and nonnegative, else ``F * reflect(F)``."""
    R = ms.reflect(F)
    if len(R) == len(F) and np.allclose(R.locations, F.locations) and np.allclose(R.masses, F.masses):
        t = np.linspace(-50, 50, 2001)
        if np.all(ms.charfn(F, t).real >= -1e-12):
            return F, "F"
    return ms.convolve(F, R), "F*reflect(F)"


def validate_presman(M: SignedMeasure, gamma: float, upsilon: float,
                     rtol: float = QUAD_RTOL) -> ValidationRecord:
    """``||M||^2 <= (1/2 + 1/(2 pi gamma)) int (gamma |M^|^2 + |(M^ e^{-it u})'|^2 / gamma)``."""
    if not np.all(M.locations == np.round(M.locations)):
        raise DomainError("Presman's inequality needs integer-supported measures")
    if not gamma > 0:
        raise InputError("gamma must be positive")
    k, m = M.locations, M.masses

    def integrand(t):
        ph = np.exp(1j * np.outer(t, k - upsilon))
        val = ph @ m
        der = ph @ (1j * (k - upsilon) * m)
        return gamma * np.abs(val) ** 2 + np.abs(der) ** 2 / gamma

    lhs = ms.total_variation(M) ** 2
    rhs = (0.5 + 1 / (2 * math.pi * gamma)) * simpson(integrand, -math.pi, math.pi, rtol)
    return ValidationRecord(
        "lemma5.presman", {"gamma": gamma, "upsilon": upsilon, "atoms": len(M)},
        lhs, rhs, rhs - lhs, lhs <= rhs,
    )


def validate_charfn_bound(block: BlockSpec, t_grid, slack: float = 1e-12) -> list[ValidationRecord]:
    """``|F_m^(t)|, |G_m^(t)|, |Pi_m^(t)| <= exp(-0.26 Gamma1 sin^2(t w / 2))`` on a grid."""
    rep = check_conditions("theorem1", [block])
    if not rep.passed:
        bad = "; ".join(r.name for r in rep.failures())
        raise PreconditionError(f"block violates the hypotheses: {bad}")
    t = np.asarray(t_grid, dtype=np.float64)
    mo = block_moments(block)
    bound = np.exp(-0.26 * mo.Gamma1 * np.sin(t * block.weight / 2) ** 2)
    measures = {
        "F": block_distribution(block),
        "G": ap.build_g([block]),
        "Pi": ap.build_pi([block]),
    }
    out = []
    for name, M in measures.items():
        vals = np.abs(ms.charfn(M, t))
        gap = bound - vals
        i = int(np.argmin(gap))
        out.append(ValidationRecord(
            f"lemma6.glb1.{name}",
            {"block": _describe(block), "grid_points": int(t.size)},
            float(vals[i]), float(bound[i]), float(gap[i]), bool(gap[i] >= -slack),
        ))
    return out


def _describe(b) -> dict:
    d = {"kind": b.kind, "length": b.length, "weight": b.weight}
    if hasattr(b, "p"):
        d["p"] = b.p
    return d


def shape_to_dict(shape: BoundShape) -> dict:
    return asdict(shape)
