"""Finite atomic signed measures on the real line.

A :class:`SignedMeasure` stores sorted atom locations and signed masses as
read-only numpy arrays. All operations return new measures. Two bookkeeping
knobs travel with every measure:

``merge_tolerance``
    relative snap: neighbouring locations closer than
    ``merge_tolerance * max(1, |x|)`` are merged by adding masses.
``prune_threshold``
    atoms with ``|mass| <= prune_threshold`` are dropped; the discarded
    absolute mass is accumulated in ``dropped_mass_bound``, an upper bound on
    the total-variation distance to the un-pruned measure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, InputError, ResourceError

DEFAULT_MERGE_TOLERANCE = 1e-9
DEFAULT_PRUNE_THRESHOLD = 1e-15
DEFAULT_SERIES_TOL = 1e-15
SERIES_CAP = 10_000
# pairwise-sum cap for off-lattice convolution
MAX_PAIRS = 50_000_000


class Atom(NamedTuple):
    location: float
    mass: float


def _normalize(x, m, merge_tolerance, prune_threshold, dropped):
    x = np.asarray(x, dtype=np.float64).ravel()
    m = np.asarray(m, dtype=np.float64).ravel()
    if x.shape != m.shape:
        raise InputError("locations and masses must have equal length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(m))):
        raise InputError("atom locations and masses must be finite")
    if x.size:
        order = np.argsort(x, kind="stable")
        x, m = x[order], m[order]
        gaps = np.diff(x)
        new_group = gaps > merge_tolerance * np.maximum(1.0, np.abs(x[1:]))
        starts = np.concatenate(([0], np.flatnonzero(new_group) + 1))
        x = x[starts]
        m = np.add.reduceat(m, starts)
        keep = np.abs(m) > prune_threshold
        if not np.all(keep):
            dropped += float(np.abs(m[~keep]).sum())
            x, m = x[keep], m[keep]
    x.setflags(write=False)
    m.setflags(write=False)
    return x, m, dropped


@dataclass(frozen=True, eq=False)
class SignedMeasure:
    """Immutable finite atomic signed measure.

    Build instances with :func:`from_atoms` (or :meth:`from_arrays`); the
    dataclass constructor assumes already-normalized arrays.
    """

    locations: np.ndarray
    masses: np.ndarray
    merge_tolerance: float = DEFAULT_MERGE_TOLERANCE
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD
    dropped_mass_bound: float = 0.0

    @classmethod
    def from_arrays(
        cls,
        locations,
        masses,
        merge_tolerance: float = DEFAULT_MERGE_TOLERANCE,
        prune_threshold: float = DEFAULT_PRUNE_THRESHOLD,
        dropped_mass_bound: float = 0.0,
    ) -> "SignedMeasure":
        if merge_tolerance < 0 or prune_threshold < 0:
            raise InputError("tolerances must be nonnegative")
        x, m, dropped = _normalize(
            locations, masses, merge_tolerance, prune_threshold, dropped_mass_bound
        )
        return cls(x, m, float(merge_tolerance), float(prune_threshold), dropped)

    def _like(self, locations, masses, dropped, other=None) -> "SignedMeasure":
        merge, prune = self.merge_tolerance, self.prune_threshold
        if other is not None:
            merge = max(merge, other.merge_tolerance)
            prune = max(prune, other.prune_threshold)
        return SignedMeasure.from_arrays(locations, masses, merge, prune, dropped)

    # -- basic accessors ---------------------------------------------------

    def __len__(self) -> int:
        return int(self.locations.size)

    @property
    def atoms(self) -> tuple[Atom, ...]:
        return tuple(Atom(float(x), float(m)) for x, m in zip(self.locations, self.masses))

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def mass_at(self, x: float) -> float:
        """Mass of the atom at ``x`` (within the merge tolerance), else 0."""
        tol = self.merge_tolerance * max(1.0, abs(x))
        i = np.searchsorted(self.locations, x - tol, side="left")
        if i < len(self) and abs(self.locations[i] - x) <= tol:
            return float(self.masses[i])
        return 0.0

    def is_distribution(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.masses >= 0)) and abs(self.total_mass - 1.0) <= tol

    def mean(self) -> float:
        return float(np.dot(self.locations, self.masses))

    def abs_moment(self, order: float = 1.0) -> float:
        return float(np.dot(np.abs(self.locations) ** order, self.masses))

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "SignedMeasure") -> "SignedMeasure":
        if not isinstance(other, SignedMeasure):
            return NotImplemented
        return self._like(
            np.concatenate((self.locations, other.locations)),
            np.concatenate((self.masses, other.masses)),
            self.dropped_mass_bound + other.dropped_mass_bound,
            other,
        )

    def __neg__(self) -> "SignedMeasure":
        return SignedMeasure(
            self.locations, -self.masses, self.merge_tolerance,
            self.prune_threshold, self.dropped_mass_bound,
        )

    def __sub__(self, other: "SignedMeasure") -> "SignedMeasure":
        if not isinstance(other, SignedMeasure):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        """Scalar multiple of the masses, or convolution with another measure."""
        if isinstance(other, SignedMeasure):
            return convolve(self, other)
        c = float(other)
        if not math.isfinite(c):
            raise InputError("scalar factor must be finite")
        return self._like(self.locations, self.masses * c, self.dropped_mass_bound * abs(c))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        return self * (1.0 / float(other))

    def __pow__(self, n: int) -> "SignedMeasure":
        return convolve_power(self, n)

    def __repr__(self) -> str:
        body = ", ".join(f"{x:g}: {m:.6g}" for x, m in self.atoms[:8])
        more = ", ..." if len(self) > 8 else ""
        return f"SignedMeasure({{{body}{more}}}, atoms={len(self)})"

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "atoms": [{"x": float(x), "m": float(m)} for x, m in zip(self.locations, self.masses)],
            "merge_tolerance": self.merge_tolerance,
            "prune_threshold": self.prune_threshold,
            "dropped_mass_bound": self.dropped_mass_bound,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "SignedMeasure":
        atoms = data["atoms"]
        x = np.array([a["x"] for a in atoms], dtype=np.float64)
        m = np.array([a["m"] for a in atoms], dtype=np.float64)
        if x.size > 1 and not np.all(np.diff(x) > 0):
            raise InputError("serialized atoms must be strictly increasing")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(m))):
            raise InputError("atom locations and masses must be finite")
        x.setflags(write=False)
        m.setflags(write=False)
        return cls(
            x, m,
            float(data.get("merge_tolerance", DEFAULT_MERGE_TOLERANCE)),
            float(data.get("prune_threshold", DEFAULT_PRUNE_THRESHOLD)),
            float(data.get("dropped_mass_bound", 0.0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "SignedMeasure":
        return cls.from_dict(json.loads(text))


# -- constructors ------------------------------------------------------------


def from_atoms(
    pairs: Iterable[Sequence[float]],
    merge_tolerance: float = DEFAULT_MERGE_TOLERANCE,
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD,
) -> SignedMeasure:
    """Build a measure from ``(location, mass)`` pairs."""
    pairs = [tuple(p) for p in pairs]
    if any(len(p) != 2 for p in pairs):
        raise InputError("atoms must be (location, mass) pairs")
    x = [p[0] for p in pairs]
    m = [p[1] for p in pairs]
    return SignedMeasure.from_arrays(x, m, merge_tolerance, prune_threshold)


def dirac(a: float = 0.0, mass: float = 1.0) -> SignedMeasure:
    return from_atoms([(a, mass)])


def zero_measure() -> SignedMeasure:
    return SignedMeasure.from_arrays([], [])


def bernoulli(p: float, at: float = 1.0) -> SignedMeasure:
    return from_atoms([(0.0, 1.0 - p), (at, p)])


def lattice(pmf: Sequence[float], span: float = 1.0) -> SignedMeasure:
    """Measure with mass ``pmf[k]`` at ``k * span``."""
    pmf = np.asarray(pmf, dtype=np.float64)
    return SignedMeasure.from_arrays(np.arange(pmf.size) * span, pmf)


# -- operations --------------------------------------------------------------


def scale_support(F: SignedMeasure, w: float) -> SignedMeasure:
    """Pushforward under ``x -> w x``."""
    w = float(w)
    if not math.isfinite(w):
        raise InputError("weight must be finite")
    return F._like(F.locations * w, F.masses, F.dropped_mass_bound)


def reflect(F: SignedMeasure) -> SignedMeasure:
    """Pushforward under ``x -> -x``."""
    return SignedMeasure(
        np.ascontiguousarray(-F.locations[::-1]),
        np.ascontiguousarray(F.masses[::-1]),
        F.merge_tolerance, F.prune_threshold, F.dropped_mass_bound,
    )


def _is_integral(x: np.ndarray) -> bool:
    return bool(np.all(x == np.round(x)))


def convolve(A: SignedMeasure, B: SignedMeasure) -> SignedMeasure:
    nA, nB = total_variation(A), total_variation(B)
    dA, dB = A.dropped_mass_bound, B.dropped_mass_bound
    # ||A'B' - AB|| <= dA ||B|| + ||A|| dB + dA dB; max() keeps the bound monotone
    dropped = max(dA * nB + nA * dB + dA * dB, dA, dB)
    if len(A) == 0 or len(B) == 0:
        return A._like([], [], dropped, B)
    if _is_integral(A.locations) and _is_integral(B.locations):
        a0, b0 = int(A.locations[0]), int(B.locations[0])
        spanA = int(A.locations[-1]) - a0 + 1
        spanB = int(B.locations[-1]) - b0 + 1
        if spanA + spanB < 10_000_000 and spanA * spanB <= 4 * MAX_PAIRS:
            da = np.zeros(spanA)
            da[A.locations.astype(np.int64) - a0] = A.masses
            db = np.zeros(spanB)
            db[B.locations.astype(np.int64) - b0] = B.masses
            dc = np.convolve(da, db)
            x = np.arange(dc.size, dtype=np.float64) + (a0 + b0)
            nz = dc != 0.0
            return A._like(x[nz], dc[nz], dropped, B)
    if len(A) * len(B) > MAX_PAIRS:
        raise ResourceError(
            f"convolution would form {len(A) * len(B)} atom pairs", required=len(A) * len(B)
        )
    x = np.add.outer(A.locations, B.locations).ravel()
    m = np.multiply.outer(A.masses, B.masses).ravel()
    return A._like(x, m, dropped, B)


def convolve_power(A: SignedMeasure, n: int) -> SignedMeasure:
    """``n``-fold convolution power by binary exponentiation; ``A**0`` is ``δ_0``."""
    n = int(n)
    if n < 0:
        raise InputError("convolution power must be nonnegative")
    result = A._like([0.0], [1.0], 0.0)
    base = A
    while n:
        if n & 1:
            result = convolve(result, base)
        n >>= 1
        if n:
            base = convolve(base, base)
    return result


def _series_order(norm: float, log_prefactor: float, tol: float, cap: int) -> tuple[int, float]:
    """Smallest K with prefactor * norm^(K+1) e^norm / (K+1)! < tol, and that bound."""
    if norm == 0.0:
        return 0, 0.0
    log_tol = math.log(tol)
    base = log_prefactor + norm + math.log(norm)
    k = 0
    while True:
        log_tail = base + k * math.log(norm) - math.lgamma(k + 2)
        if log_tail < log_tol:
            return k, math.exp(log_tail)
        k += 1
        if k > cap:
            # keep counting so the error reports the order actually required
            while base + k * math.log(norm) - math.lgamma(k + 2) >= log_tol:
                k += 1
            raise ResourceError(f"exp series needs K={k} terms (cap {cap})", required=k)


def exp_measure(
    W: SignedMeasure,
    series_tol: float = DEFAULT_SERIES_TOL,
    cap: int = SERIES_CAP,
    max_norm: float = 0.5,
) -> SignedMeasure:
    """Convolution exponential ``sum_m W^m / m!`` with a certified error bound.

    Write ``W = a δ + V``; the atom at 0 commutes with everything, so
    ``exp(W) = E^N`` with ``E = e^(a/N) exp(V/N)``. When ``a + ||V|| <= 1``
    (every compound Poisson exponent qualifies) the series runs directly with
    ``N = 1``: intermediate sums are bounded by ``e^||V||`` and are rescaled by
    ``e^a`` only at the end. Otherwise ``N = 2^s`` is chosen so that
    ``||V|| / N <= max_norm`` and ``E^N`` is formed by repeated squaring.

    The truncation order keeps the propagated series error
    ``N rho^(N-1) e^(a/N) tail`` (``rho = e^((a + ||V||)/N)`` bounds the
    factor norm) below ``series_tol``. That bound plus all pruning losses is
    added to ``dropped_mass_bound``.
    """
    if series_tol <= 0:
        raise InputError("series_tol must be positive")
    a = W.mass_at(0.0)
    keep = np.abs(W.locations) > W.merge_tolerance
    norm_v = float(np.abs(W.masses[keep]).sum())
    s = 0
    if a + norm_v > 1.0 or norm_v > 500.0:
        while norm_v / 2**s > max_norm:
            s += 1
    N = 2**s
    log_rho = (a + norm_v) / N
    log_prefactor = math.log(N) + (N - 1) * log_rho + a / N
    K, tail = _series_order(norm_v / N, log_prefactor, series_tol, cap)

    # a pruned atom of mass u in a running term moves the result by at most
    # u e^(a + ||V||)/N per factor, so prune relative to that amplification
    term_prune = W.prune_threshold * math.exp(-log_rho)
    acc_prune = W.prune_threshold * math.exp(-a / N)
    small = SignedMeasure(
        W.locations[keep], W.masses[keep] / N, W.merge_tolerance, term_prune, 0.0
    )
    term = small._like([0.0], [1.0], 0.0)
    acc = SignedMeasure(term.locations, term.masses, W.merge_tolerance, acc_prune, 0.0)
    for m in range(1, K + 1):
        term = convolve(term, small) * (1.0 / m)
        acc = acc + term
    E = SignedMeasure.from_arrays(
        acc.locations, acc.masses * math.exp(a / N), W.merge_tolerance, W.prune_threshold,
        acc.dropped_mass_bound * math.exp(a / N),
    )
    for _ in range(s):
        E = convolve(E, E)
    # ||exp(W + D) - exp(W)|| <= e^||W|| (e^||D|| - 1) covers the input's own pruning
    inherited = math.exp(total_variation(W)) * math.expm1(W.dropped_mass_bound)
    bound = E.dropped_mass_bound + tail + inherited
    return SignedMeasure(E.locations, E.masses, W.merge_tolerance, W.prune_threshold, bound)


def total_variation(W: SignedMeasure) -> float:
    return float(np.abs(W.masses).sum())


def kolmogorov_norm(W: SignedMeasure) -> float:
    if len(W) == 0:
        return 0.0
    return float(max(np.abs(np.cumsum(W.masses)).max(), 0.0))


def kolmogorov_distance(A: SignedMeasure, B: SignedMeasure) -> float:
    return kolmogorov_norm(A - B)


def tv_distance(A: SignedMeasure, B: SignedMeasure) -> float:
    """Total-variation norm of ``A - B`` (no factor 1/2)."""
    return total_variation(A - B)


def cdf(W: SignedMeasure, x):
    """``W((-inf, x])``; vectorized over ``x``."""
    cs = np.concatenate(([0.0], np.cumsum(W.masses)))
    idx = np.searchsorted(W.locations, x, side="right")
    out = cs[idx]
    return float(out) if np.ndim(out) == 0 else out


def concentration(F: SignedMeasure, h: float) -> float:
    """Lévy concentration function ``sup_x F([x, x+h])`` for a nonnegative measure."""
    if h < 0 or not math.isfinite(h):
        raise InputError("window width h must be finite and nonnegative")
    if np.any(F.masses < 0):
        raise DomainError("concentration function is defined for nonnegative measures only")
    if len(F) == 0:
        return 0.0
    x = F.locations
    # right edges within the merge tolerance count as inside the closed window
    right = x + h
    right = right + F.merge_tolerance * np.maximum(1.0, np.abs(right))
    hi = np.searchsorted(x, right, side="right")
    cs = np.concatenate(([0.0], np.cumsum(F.masses)))
    return float((cs[hi] - cs[:-1]).max())


def charfn(W: SignedMeasure, t):
    """Fourier-Stieltjes transform ``sum_k m_k exp(i t x_k)``; vectorized over ``t``."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = np.empty(t_arr.shape, dtype=np.complex128)
    flat_t = t_arr.ravel()
    flat = out.ravel()
    chunk = max(1, 2_000_000 // max(1, len(W)))
    for i in range(0, flat_t.size, chunk):
        tt = flat_t[i : i + chunk]
        flat[i : i + chunk] = np.exp(1j * np.outer(tt, W.locations)) @ W.masses
    out = flat.reshape(t_arr.shape)
    return complex(out[0]) if np.ndim(t) == 0 else out
