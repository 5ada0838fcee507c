"""Offspring distributions with no death and their generating-function calculus."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidDistributionError, MomentUnavailableError, SubcriticalError

# Binomials and composition sums are evaluated exactly up to this order.
MAX_ORDER = 20
TRUNCATION_TOLERANCE = 1e-10
DEFAULT_GEOMETRIC_TRUNCATION = 60


@dataclass(frozen=True)
class OffspringDistribution:
    """Finite pmf ``probs[n] = P(Z = n)`` with ``probs[0] == 0``.

    Parametric families are stored as their truncated, renormalized pmf;
    ``max_exact_moment`` records the largest order whose factorial moment is
    within ``TRUNCATION_TOLERANCE`` of the untruncated family.
    """

    probs: np.ndarray
    max_exact_moment: int = MAX_ORDER
    description: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size < 2:
            raise InvalidDistributionError("pmf must list at least P(Z=1)")
        if np.any(~np.isfinite(probs)) or np.any(probs < 0):
            raise InvalidDistributionError("probabilities must be finite and nonnegative")
        if probs[0] != 0.0:
            raise InvalidDistributionError("P(Z=0) must be 0 (no death)")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise InvalidDistributionError(f"probabilities sum to {probs.sum()!r}, not 1")
        # trim trailing zeros so len(probs) - 1 is the maximal degree
        last = int(np.nonzero(probs)[0][-1])
        probs = probs[: last + 1].copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        mean = float(np.dot(np.arange(probs.size), probs))
        if not mean > 1.0:
            raise SubcriticalError(f"mean offspring {mean} must exceed 1")
        object.__setattr__(self, "_mean", mean)
        cdf = np.cumsum(probs[1:])
        cdf[-1] = 1.0
        cdf.setflags(write=False)
        object.__setattr__(self, "_cdf", cdf)

    # -- constructors -----------------------------------------------------

    @classmethod
    def finite(cls, pmf) -> "OffspringDistribution":
        """Build from a mapping ``{n: p_n}`` or a sequence of ``(n, p_n)`` pairs."""
        items = pmf.items() if isinstance(pmf, dict) else pmf
        pairs = []
        for key, prob in items:
            try:
                n = int(str(key).strip())
            except ValueError:
                raise InvalidDistributionError(f"offspring count {key!r} is not an integer") from None
            if n < 1:
                raise InvalidDistributionError(f"offspring count {key!r} must be >= 1")
            pairs.append((n, float(prob)))
        if not pairs:
            raise InvalidDistributionError("empty pmf")
        top = max(n for n, _ in pairs)
        probs = np.zeros(top + 1)
        for n, prob in pairs:
            probs[n] += prob
        desc = {"type": "finite", "pmf": [[str(n), float(probs[n])] for n in range(1, top + 1) if probs[n] > 0]}
        return cls(probs, MAX_ORDER, desc)

    @classmethod
    def deterministic(cls, d: int) -> "OffspringDistribution":
        return cls.finite({d: 1.0})

    @classmethod
    def geometric(cls, q: float, truncate: int = DEFAULT_GEOMETRIC_TRUNCATION) -> "OffspringDistribution":
        """P(Z=n) = (1-q) q^(n-1) on {1, 2, ...}, truncated at ``truncate`` and renormalized."""
        if not 0.0 < q < 1.0:
            raise InvalidDistributionError("geometric ratio q must lie in (0, 1)")
        if truncate < 2:
            raise InvalidDistributionError("truncation must be at least 2")
        n = np.arange(truncate + 1)
        probs = np.where(n >= 1, (1 - q) * q ** np.maximum(n - 1, 0), 0.0)
        probs /= probs.sum()
        # exact factorial moments of the untruncated family: q^(r-1) / (1-q)^r
        max_exact = 0
        for r in range(1, MAX_ORDER + 1):
            exact = q ** (r - 1) / (1 - q) ** r
            trunc = _factorial_moment(probs, r)
            if abs(trunc - exact) >= TRUNCATION_TOLERANCE:
                break
            max_exact = r
        desc = {"type": "geometric", "q": q, "truncate": truncate}
        return cls(probs, max_exact, desc)

    @classmethod
    def from_json(cls, data) -> "OffspringDistribution":
        """Parse the JSON description (a dict, a JSON string, or a path)."""
        if isinstance(data, (str, Path)):
            text = str(data)
            if not text.lstrip().startswith("{"):
                text = Path(data).read_text()
            data = json.loads(text)
        kind = data.get("type")
        if kind == "finite":
            return cls.finite(data["pmf"])
        if kind == "geometric":
            return cls.geometric(float(data["q"]), int(data.get("truncate", DEFAULT_GEOMETRIC_TRUNCATION)))
        raise InvalidDistributionError(f"unknown distribution type {kind!r}")

    def to_json(self) -> str:
        return json.dumps(self.description, sort_keys=True)

    # -- basic quantities -------------------------------------------------

    @property
    def mean(self) -> float:
        return self._mean

    @property
    def max_degree(self) -> int:
        return self.probs.size - 1

    @property
    def cdf(self) -> np.ndarray:
        """``cdf[k] = P(Z <= k + 1)``; the last entry is exactly 1."""
        return self._cdf

    @property
    def is_deterministic(self) -> bool:
        return np.count_nonzero(self.probs) == 1

    def _check_order(self, r):
        if r > self.max_exact_moment:
            raise MomentUnavailableError(r, self.max_exact_moment)


def _factorial_moment(probs, r):
    n = np.arange(probs.size)
    return float(np.dot(probs, [math.comb(int(k), r) for k in n]))


def _falling(n, r):
    out = np.ones_like(n, dtype=float)
    for i in range(r):
        out *= n - i
    return out


def pgf(dist: OffspringDistribution, order: int, z: float) -> float:
    """``order``-th derivative of the offspring generating function at ``z``."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    dist._check_order(order)
    n = np.arange(dist.probs.size)
    mask = n >= order
    coef = dist.probs[mask] * _falling(n[mask], order)
    return float(np.dot(coef, np.power(float(z), n[mask] - order)))


def factorial_moment(dist: OffspringDistribution, r: int) -> float:
    """m_r = E binom(Z, r)."""
    if r < 1:
        raise ValueError("r must be at least 1")
    dist._check_order(r)
    return _factorial_moment(dist.probs, r)


def critical_parameter(dist: OffspringDistribution) -> float:
    if dist.mean <= 1.0:
        raise SubcriticalError(f"mean offspring {dist.mean} must exceed 1")
    return 1.0 / dist.mean


def sample_offspring(dist: OffspringDistribution, u: float) -> int:
    """Inverse-CDF draw: the smallest n with CDF(n) > u."""
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    return int(np.searchsorted(dist.cdf, u, side="right")) + 1


def sample_offspring_array(dist: OffspringDistribution, u: np.ndarray) -> np.ndarray:
    return np.searchsorted(dist.cdf, u, side="right").astype(np.int64) + 1


def one_minus_pgf(dist: OffspringDistribution, x: float) -> float:
    """1 - phi(1 - x), accurate for tiny x."""
    if x >= 1.0:
        return 1.0
    n = np.arange(1, dist.probs.size)
    return float(np.dot(dist.probs[1:], -np.expm1(n * math.log1p(-x))))


# handy named distributions used throughout tests and the CLI
def binary() -> OffspringDistribution:
    return OffspringDistribution.deterministic(2)


def one_or_three() -> OffspringDistribution:
    return OffspringDistribution.finite({1: 0.5, 3: 0.5})
