"""Seeded generators for randomized validation instances."""

from __future__ import annotations

import math

import numpy as np

from . import measure as ms
from .blocks import GeneralJump, IIDLattice, TwoRuns
from .measure import SignedMeasure


def random_distribution(rng: np.random.Generator, max_atoms: int = 8, integer: bool = False,
                        spread: float = 5.0) -> SignedMeasure:
    k = int(rng.integers(1, max_atoms + 1))
    if integer:
        x = rng.choice(np.arange(-int(spread), int(spread) + 1), size=k, replace=False)
    else:
        x = rng.uniform(-spread, spread, size=k)
    w = rng.dirichlet(np.ones(k))
    return SignedMeasure.from_arrays(x.astype(float), w)


def random_signed_measure(rng: np.random.Generator, max_atoms: int = 50,
                          spread: float = 10.0) -> SignedMeasure:
    k = int(rng.integers(1, max_atoms + 1))
    x = np.round(rng.uniform(-spread, spread, size=k), 3)
    m = rng.normal(size=k)
    return SignedMeasure.from_arrays(x, m)


def random_integer_signed_measure(rng: np.random.Generator, lo: int = -3, hi: int = 3) -> SignedMeasure:
    x = np.arange(lo, hi + 1, dtype=float)
    m = rng.normal(size=x.size) * (rng.random(x.size) < 0.7)
    if not np.any(m):
        m[int(rng.integers(x.size))] = 1.0
    return SignedMeasure.from_arrays(x, m)


def random_zero_mass_measure(rng: np.random.Generator, max_norm: float = 2.0,
                             max_atoms: int = 4) -> SignedMeasure:
    """Random measure with total mass 0 and total variation at most ``max_norm``."""
    k = int(rng.integers(1, max_atoms + 1))
    x = rng.integers(-3, 4, size=k).astype(float)
    if rng.random() < 0.5:
        x = x * math.sqrt(2)
    m = rng.normal(size=k)
    m = np.concatenate((m, [-m.sum()]))
    x = np.concatenate((x, [0.0]))
    W = SignedMeasure.from_arrays(x, m)
    norm = ms.total_variation(W)
    if norm == 0:
        return W
    return W * (rng.uniform(0.1, max_norm) / norm)


def random_tworuns_valid(rng: np.random.Generator) -> TwoRuns:
    """Two-runs block that satisfies the 1-dependent theorem's hypotheses."""
    n = int(rng.integers(10, 201))
    # Σ|Cov| = (n-1) p^3 (1-p) <= n p^2 / 20 holds for p <= 0.05
    p = float(rng.uniform(0.005, 0.05))
    w = float(rng.choice([1.0, 2.0, math.sqrt(2), 0.5]))
    return TwoRuns(p, n, w)


def random_roos_hipp_blocks(rng: np.random.Generator, max_summands: int = 6,
                            p_max: float = 0.5) -> list[GeneralJump]:
    """Independent summands ``(1-p) δ + p B`` with atomic ``B`` on ``(0, inf)``."""
    total = int(rng.integers(1, max_summands + 1))
    blocks = []
    while total > 0:
        n = int(rng.integers(1, total + 1))
        k = int(rng.integers(1, 4))
        x = rng.choice([1.0, 2.0, 3.0, math.sqrt(2), math.sqrt(3), 0.5], size=k, replace=False)
        B = SignedMeasure.from_arrays(x, rng.dirichlet(np.ones(k)))
        blocks.append(GeneralJump(float(rng.uniform(0.0, p_max)), B, n))
        total -= n
    return blocks


def random_franken_blocks(rng: np.random.Generator, max_blocks: int = 3) -> list[IIDLattice]:
    """I.i.d. lattice blocks with a positive Franken gap."""
    blocks = []
    for _ in range(int(rng.integers(1, max_blocks + 1))):
        while True:
            p1, p2 = rng.uniform(0.0, 0.4), rng.uniform(0.0, 0.1)
            pmf = (1 - p1 - p2, p1, p2)
            nu1, nu2 = p1 + 2 * p2, 2 * p2
            if nu1 - nu1**2 - nu2 > 0:
                break
        w = float(rng.choice([1.0, 2.0, math.sqrt(2), 0.75]))
        blocks.append(IIDLattice(pmf, int(rng.integers(1, 30)), w))
    return blocks


def random_general_jump_blocks(rng: np.random.Generator, max_blocks: int = 3) -> list[GeneralJump]:
    blocks = []
    for _ in range(int(rng.integers(1, max_blocks + 1))):
        k = int(rng.integers(1, 4))
        x = rng.choice([-2.0, -1.0, 1.0, 2.0, math.sqrt(2), -math.sqrt(3), 0.5], size=k, replace=False)
        B = SignedMeasure.from_arrays(x, rng.dirichlet(np.ones(k)))
        blocks.append(GeneralJump(float(rng.uniform(0.0, 0.9)), B, int(rng.integers(1, 30))))
    return blocks
