"""Compound Poisson approximants and smoothing measures as explicit measures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import measure as ms
from .blocks import BlockSpec, GeneralJump, IIDLattice, block_moments
from .errors import DomainError, InputError
from .measure import DEFAULT_SERIES_TOL, SignedMeasure

SMOOTHING_KINDS = ("M1", "M2", "M3", "HTILDE")


@dataclass(frozen=True)
class CPComponent:
    """One exponent summand ``rate_linear (J - δ) + rate_quadratic (J - δ)^2``."""

    rate_linear: float
    rate_quadratic: float
    jump: SignedMeasure

    def __post_init__(self):
        if not self.jump.is_distribution(1e-12):
            raise InputError("compound Poisson jump law must be a probability distribution")

    def exponent(self) -> SignedMeasure:
        d = self.jump - ms.dirac(0.0)
        out = self.rate_linear * d
        if self.rate_quadratic:
            out = out + self.rate_quadratic * ms.convolve(d, d)
        return out


def compound_poisson(
    components: Sequence[CPComponent], series_tol: float = DEFAULT_SERIES_TOL
) -> SignedMeasure:
    """``exp{sum_m rate_linear (J_m - δ) + rate_quadratic (J_m - δ)^2}``."""
    W = ms.zero_measure()
    for c in components:
        W = W + c.exponent()
    return ms.exp_measure(W, series_tol)


def _symmetric_pair(w: float) -> SignedMeasure:
    return ms.from_atoms([(w, 0.5), (-w, 0.5)])


def _lattice_blocks(blocks, what):
    for b in blocks:
        if isinstance(b, GeneralJump):
            raise DomainError(f"{what} needs integer-valued summands; got a general-jump block")


def _require(blocks, cls, what):
    for b in blocks:
        if not isinstance(b, cls):
            raise DomainError(f"{what} requires {cls.__name__} blocks, got {type(b).__name__}")


def pi_components(blocks: Sequence[BlockSpec]) -> list[CPComponent]:
    _lattice_blocks(blocks, "Π")
    return [CPComponent(block_moments(b).Gamma1, 0.0, ms.dirac(b.weight)) for b in blocks]


def g_components(blocks: Sequence[BlockSpec]) -> list[CPComponent]:
    _lattice_blocks(blocks, "G")
    out = []
    for b in blocks:
        mo = block_moments(b)
        out.append(CPComponent(mo.Gamma1, mo.Gamma2, ms.dirac(b.weight)))
    return out


def build_pi(blocks: Sequence[BlockSpec], series_tol: float = DEFAULT_SERIES_TOL) -> SignedMeasure:
    """First-order approximant: rates ``Gamma_m1`` on jumps ``δ_{w_m}``."""
    return compound_poisson(pi_components(blocks), series_tol)


def build_g(blocks: Sequence[BlockSpec], series_tol: float = DEFAULT_SERIES_TOL) -> SignedMeasure:
    """Second-order signed approximant: adds quadratic rates ``Gamma_m2``."""
    return compound_poisson(g_components(blocks), series_tol)


def franken_components(blocks: Sequence[BlockSpec]) -> list[CPComponent]:
    _require(blocks, IIDLattice, "the Franken-type second-order approximant")
    out = []
    for b in blocks:
        nu1, nu2, _ = block_moments(b).summand_nu
        n = b.length
        out.append(CPComponent(n * nu1, n * (nu2 - nu1**2) / 2, ms.dirac(b.weight)))
    return out


def build_franken_second(
    blocks: Sequence[BlockSpec], series_tol: float = DEFAULT_SERIES_TOL
) -> SignedMeasure:
    return compound_poisson(franken_components(blocks), series_tol)


def theorem3_components(blocks: Sequence[BlockSpec], order: int = 1) -> list[CPComponent]:
    if order not in (1, 2):
        raise InputError(f"order must be 1 or 2, got {order!r}")
    _require(blocks, GeneralJump, "the accompanying compound Poisson law")
    out = []
    for b in blocks:
        n, p = b.length, b.p
        quad = -n * p**2 / 2 if order == 2 else 0.0
        out.append(CPComponent(n * p, quad, b.scaled_jump))
    return out


def build_theorem3(
    blocks: Sequence[BlockSpec], order: int = 1, series_tol: float = DEFAULT_SERIES_TOL
) -> SignedMeasure:
    """Accompanying law ``exp{sum n p (B - δ)}``, optionally with ``-n p^2 (B - δ)^2 / 2``."""
    return compound_poisson(theorem3_components(blocks, order), series_tol)


def smoothing_components(kind: str, blocks: Sequence[BlockSpec]) -> list[CPComponent]:
    if kind == "M1":
        _lattice_blocks(blocks, "M1")
        # 0.025 Γ (δ_w + δ_-w - 2δ) = 0.05 Γ (½(δ_w + δ_-w) - δ)
        return [
            CPComponent(0.05 * block_moments(b).Gamma1, 0.0, _symmetric_pair(b.weight))
            for b in blocks
        ]
    if kind == "M2":
        _require(blocks, IIDLattice, "M2")
        out = []
        for b in blocks:
            lam = block_moments(b).lam
            if not lam > 0:
                raise DomainError(f"M2 needs a positive Franken gap, got lambda={lam!r}")
            # -λ sin²(tw/2) = (λ/2)(cos tw - 1)
            out.append(CPComponent(b.length * lam / 2, 0.0, _symmetric_pair(b.weight)))
        return out
    if kind == "M3":
        _require(blocks, GeneralJump, "M3")
        out = []
        for b in blocks:
            B = b.scaled_jump
            sym = 0.5 * (B + ms.reflect(B))
            out.append(CPComponent(b.length * b.p * (1 - b.p) / 2, 0.0, sym))
        return out
    if kind == "HTILDE":
        _require(blocks, GeneralJump, "HTILDE")
        return [
            CPComponent(b.length * b.p * (1 - b.p) / 2, 0.0, b.scaled_jump) for b in blocks
        ]
    raise InputError(f"unknown smoothing kind {kind!r}; choose from {SMOOTHING_KINDS}")


def build_smoothing(
    kind: str, blocks: Sequence[BlockSpec], series_tol: float = DEFAULT_SERIES_TOL
) -> SignedMeasure:
    """Smoothing measure ``M1``, ``M2``, ``M3`` or ``HTILDE`` for the given blocks.

    ``M1``-``M3`` are symmetric compound Poisson laws; ``HTILDE`` is not
    symmetrized (its jumps are the original ``B_i``).
    """
    return compound_poisson(smoothing_components(kind, blocks), series_tol)


def expand_summands(blocks: Sequence[GeneralJump]) -> list[GeneralJump]:
    """Split every general-jump block into ``n_m`` single-summand blocks."""
    _require(blocks, GeneralJump, "summand expansion")
    out = []
    for b in blocks:
        out.extend(GeneralJump(b.p, b.jump, 1, b.weight) for _ in range(b.length))
    return out


__all__ = [
    "CPComponent", "compound_poisson", "build_pi", "build_g", "build_franken_second",
    "build_theorem3", "build_smoothing", "expand_summands", "SMOOTHING_KINDS",
]
