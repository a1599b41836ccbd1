"""Blocks ``w_m S_m`` and their exact laws and moment summaries.

Four block kinds are supported:

* :class:`IIDLattice` -- ``n`` i.i.d. copies of a pmf on ``{0, 1, 2, ...}``;
* :class:`LatentDriver` -- 1-dependent summands ``X_k = f(eta_k, eta_{k+1})``
  driven by ``n + 1`` i.i.d. finite-support variables;
* :class:`TwoRuns` -- the latent-driver case with Bernoulli(p) drivers and
  ``f(a, b) = a * b``;
* :class:`GeneralJump` -- ``n`` i.i.d. copies of ``(1 - p) δ + p B``.

Summands with index ``j < 1`` are treated as identically zero, so every
moment term that reaches outside the block contributes nothing.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, ClassVar, Mapping, Sequence, Union

import numpy as np

from . import measure as ms
from .errors import InputError
from .measure import SignedMeasure

PMF_TOL = 1e-12

LINKS: dict[str, Callable[[float, float], float]] = {
    "product": lambda a, b: a * b,
    "min": min,
    "max": max,
    "sum": lambda a, b: a + b,
    "first": lambda a, b: a,
}


def _check_common(length, weight):
    if isinstance(length, bool) or int(length) != length or length < 1:
        raise InputError(f"block length must be a positive integer, got {length!r}")
    if not math.isfinite(weight) or weight == 0:
        raise InputError(f"block weight must be finite and nonzero, got {weight!r}")


def _check_pmf(pmf, what="pmf"):
    pmf = np.asarray(pmf, dtype=np.float64)
    if pmf.ndim != 1 or pmf.size == 0:
        raise InputError(f"{what} must be a nonempty sequence")
    if not np.all(np.isfinite(pmf)) or np.any(pmf < 0):
        raise InputError(f"{what} masses must be finite and nonnegative")
    if abs(pmf.sum() - 1.0) > PMF_TOL:
        raise InputError(f"{what} must sum to 1 (got {pmf.sum()!r})")
    return pmf


@dataclass(frozen=True)
class IIDLattice:
    """``n`` i.i.d. summands with law ``pmf[k]`` at ``k``."""

    pmf: tuple
    length: int
    weight: float = 1.0
    kind: ClassVar[str] = "iid_lattice"

    def __post_init__(self):
        object.__setattr__(self, "pmf", tuple(float(v) for v in _check_pmf(self.pmf)))
        _check_common(self.length, self.weight)

    def summand_law(self) -> SignedMeasure:
        return ms.lattice(self.pmf)


@dataclass(frozen=True)
class LatentDriver:
    """1-dependent summands ``X_k = link(eta_k, eta_{k+1})``.

    ``link`` is either a name from :data:`LINKS` or an explicit table mapping
    ``(a, b)`` driver-value pairs to nonnegative integers.
    """

    driver_support: tuple
    driver_pmf: tuple
    link: Union[str, Mapping]
    length: int
    weight: float = 1.0
    kind: ClassVar[str] = "latent_driver"

    def __post_init__(self):
        support = tuple(float(v) for v in self.driver_support)
        pmf = _check_pmf(self.driver_pmf, "driver pmf")
        if len(support) != pmf.size:
            raise InputError("driver support and pmf differ in length")
        if len(set(support)) != len(support):
            raise InputError("driver support values must be distinct")
        object.__setattr__(self, "driver_support", support)
        object.__setattr__(self, "driver_pmf", tuple(float(v) for v in pmf))
        if isinstance(self.link, str):
            if self.link not in LINKS:
                raise InputError(f"unknown link {self.link!r}; choose from {sorted(LINKS)}")
        else:
            object.__setattr__(self, "link", {tuple(map(float, k)): v for k, v in dict(self.link).items()})
        _check_common(self.length, self.weight)
        self.link_table()  # validates integrality

    def link_table(self) -> np.ndarray:
        """Integer matrix ``T[i, j] = link(support[i], support[j])``."""
        s = self.driver_support
        f = LINKS[self.link] if isinstance(self.link, str) else None
        T = np.empty((len(s), len(s)), dtype=np.int64)
        for i, a in enumerate(s):
            for j, b in enumerate(s):
                if f is not None:
                    v = f(a, b)
                else:
                    try:
                        v = self.link[(a, b)]
                    except KeyError:
                        raise InputError(f"link table has no entry for {(a, b)}") from None
                if not (math.isfinite(v) and v >= 0 and v == int(v)):
                    raise InputError(f"link value {v!r} at {(a, b)} is not a nonnegative integer")
                T[i, j] = int(v)
        return T


@dataclass(frozen=True)
class TwoRuns:
    """Two-runs block: ``X_k = eta_k eta_{k+1}`` with Bernoulli(p) drivers."""

    p: float
    length: int
    weight: float = 1.0
    kind: ClassVar[str] = "two_runs"

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise InputError(f"two-runs p must lie in [0, 1], got {self.p!r}")
        _check_common(self.length, self.weight)

    def as_latent(self) -> LatentDriver:
        return LatentDriver((0.0, 1.0), (1.0 - self.p, self.p), "product", self.length, self.weight)


@dataclass(frozen=True)
class GeneralJump:
    """``n`` i.i.d. summands with law ``(1 - p) δ + p B``; ``B`` is atomic."""

    p: float
    jump: SignedMeasure
    length: int
    weight: float = 1.0
    kind: ClassVar[str] = "general_jump"

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise InputError(f"jump probability must lie in [0, 1], got {self.p!r}")
        if not self.jump.is_distribution(PMF_TOL):
            raise InputError("jump law B must be a probability distribution")
        _check_common(self.length, self.weight)

    @property
    def scaled_jump(self) -> SignedMeasure:
        return ms.scale_support(self.jump, self.weight)

    def summand_law(self) -> SignedMeasure:
        return (1.0 - self.p) * ms.dirac(0.0) + self.p * self.jump


BlockSpec = Union[IIDLattice, LatentDriver, TwoRuns, GeneralJump]


@dataclass
class MomentSummary:
    """Moment-derived scalars of one block.

    Per-summand arrays are indexed by ``k - 1`` for ``k = 1..n``; entries that
    involve a summand before the first one are zero.
    """

    nu1: np.ndarray | None = None
    nu2: np.ndarray | None = None
    nu3: np.ndarray | None = None
    cov_adjacent: np.ndarray | None = None
    pair_moments: np.ndarray | None = None
    triple_moments: np.ndarray | None = None
    R1_terms: np.ndarray | None = None
    Gamma1: float | None = None
    Gamma2: float | None = None
    R0: float | None = None
    R1: float | None = None
    lam: float | None = None
    r1: float | None = None
    mu1: float | None = None
    p: float | None = None
    length: int = 0
    weight: float = 1.0
    extra: dict = field(default_factory=dict)

    @property
    def summand_nu(self) -> tuple[float, float, float]:
        """``(nu1, nu2, nu3)`` of a single summand (i.i.d. kinds)."""
        return float(self.nu1[0]), float(self.nu2[0]), float(self.nu3[0])


# -- exact laws -----------------------------------------------------------------


def _latent_sum_pmf(spec: LatentDriver) -> np.ndarray:
    pi = np.asarray(spec.driver_pmf)
    T = spec.link_table()
    n = spec.length
    S = pi.size
    width = n * int(T.max()) + 1
    dp = np.zeros((S, width))
    dp[:, 0] = pi
    for _ in range(n):
        new = np.zeros_like(dp)
        for a in range(S):
            row = dp[a]
            for b in range(S):
                if pi[b] == 0.0:
                    continue
                shift = T[a, b]
                if shift:
                    new[b, shift:] += row[:-shift] * pi[b]
                else:
                    new[b] += row * pi[b]
        dp = new
    return dp.sum(axis=0)


def block_distribution(spec: BlockSpec, **tol) -> SignedMeasure:
    """Exact law of ``w_m S_m``."""
    if isinstance(spec, TwoRuns):
        spec = spec.as_latent()
    if isinstance(spec, LatentDriver):
        pmf = _latent_sum_pmf(spec)
        law = SignedMeasure.from_arrays(np.arange(pmf.size, dtype=np.float64), pmf, **tol)
    elif isinstance(spec, (IIDLattice, GeneralJump)):
        single = spec.summand_law()
        if tol:
            single = SignedMeasure.from_arrays(single.locations, single.masses, **tol)
        law = ms.convolve_power(single, spec.length)
    else:
        raise InputError(f"not a block spec: {spec!r}")
    return ms.scale_support(law, spec.weight)


def weighted_sum_distribution(blocks: Sequence[BlockSpec], **tol) -> SignedMeasure:
    """Law of ``sum_m w_m S_m`` for independent blocks."""
    if not blocks:
        raise InputError("at least one block is required")
    laws = [block_distribution(b, **tol) for b in blocks]
    return reduce(ms.convolve, laws)


# -- moments ----------------------------------------------------------------------


def _falling(x, j):
    out = np.ones_like(x, dtype=np.float64)
    for i in range(j):
        out = out * (x - i)
    return out


def _window_law(spec) -> tuple[np.ndarray, np.ndarray]:
    """Joint law of ``(X_{k-2}, X_{k-1}, X_k)`` for an interior index.

    Returns ``(values, probs)`` with ``values`` of shape ``(M, 3)``.
    """
    if isinstance(spec, IIDLattice):
        pmf = np.asarray(spec.pmf)
        support = np.flatnonzero(pmf)
        vals, probs = [], []
        for a, b, c in itertools.product(support, repeat=3):
            vals.append((a, b, c))
            probs.append(pmf[a] * pmf[b] * pmf[c])
        return np.asarray(vals, dtype=np.float64), np.asarray(probs)
    pi = np.asarray(spec.driver_pmf)
    T = spec.link_table()
    idx = np.flatnonzero(pi)
    vals, probs = [], []
    for e1, e2, e3, e4 in itertools.product(idx, repeat=4):
        vals.append((T[e1, e2], T[e2, e3], T[e3, e4]))
        probs.append(pi[e1] * pi[e2] * pi[e3] * pi[e4])
    return np.asarray(vals, dtype=np.float64), np.asarray(probs)


def _lattice_moments(spec) -> MomentSummary:
    n = spec.length
    vals, probs = _window_law(spec)
    x1, x2, x3 = vals[:, 0], vals[:, 1], vals[:, 2]

    def E(v):
        return float(np.dot(v, probs))

    nu = [E(_falling(x3, j)) for j in (1, 2, 3)]
    pair = E(x2 * x3)
    triple = E(x1 * x2 * x3)
    # E X_{k-1}(X_{k-1}-1) X_k and E X_{k-1} X_k(X_k-1)
    ff_left = E(_falling(x2, 2) * x3)
    ff_right = E(x2 * _falling(x3, 2))

    k = np.arange(1, n + 1)
    has1 = (k >= 2).astype(float)  # X_{k-1} exists
    has2 = (k >= 3).astype(float)  # X_{k-2} exists
    nu1 = np.full(n, nu[0])
    nu2 = np.full(n, nu[1])
    nu3 = np.full(n, nu[2])
    nu1_m1, nu2_m1, nu1_m2 = nu[0] * has1, nu[1] * has1, nu[0] * has2
    P = pair * has1
    P_m1 = pair * has2  # E X_{k-2} X_{k-1}
    cov = P - nu1_m1 * nu1
    T3 = triple * has2

    R0 = float(np.sum(nu2 + nu1**2 + P))
    R1_terms = (
        nu1**3 + nu1 * nu2 + nu3
        + (nu1_m2 + nu1_m1 + nu1) * P
        + (ff_left * has1 + nu2_m1 * nu1)
        + (ff_right * has1 + nu1_m1 * nu2)
        + T3
        + nu1_m2 * P
        + (P_m1 + nu1_m2 * nu1_m1) * nu1
    )
    Gamma1 = float(nu1.sum())
    Gamma2 = float(0.5 * np.sum(nu2 - nu1**2) + cov[1:].sum())
    summary = MomentSummary(
        nu1=nu1, nu2=nu2, nu3=nu3, cov_adjacent=cov, pair_moments=P, triple_moments=T3,
        R1_terms=R1_terms, Gamma1=Gamma1, Gamma2=Gamma2, R0=R0, R1=float(R1_terms.sum()),
        length=n, weight=spec.weight,
    )
    if isinstance(spec, IIDLattice):
        summary.lam = nu[0] - nu[0] ** 2 - nu[1]
        summary.r1 = nu[0] ** 3 + nu[0] * nu[1] + nu[2]
    return summary


def block_moments(spec: BlockSpec) -> MomentSummary:
    """Exact moment summary of a block (unweighted summands)."""
    if isinstance(spec, TwoRuns):
        summary = _lattice_moments(spec.as_latent())
        summary.p = spec.p
        return summary
    if isinstance(spec, (IIDLattice, LatentDriver)):
        return _lattice_moments(spec)
    if isinstance(spec, GeneralJump):
        return MomentSummary(
            mu1=spec.scaled_jump.abs_moment(1.0), p=spec.p,
            length=spec.length, weight=spec.weight,
        )
    raise InputError(f"not a block spec: {spec!r}")

