"""The base instance (F_1..F_n, copy count k), the OPT law, and arrival sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .distributions import (
    Distribution,
    RandomizedThreshold,
    distribution_from_json,
    distribution_to_json,
    product_max,
)
from .errors import InvalidInstanceError, InvalidQuantileError

__all__ = ["Instance", "OptLaw", "ArrivalSequence", "make_instance", "opt_law",
           "sample_arrivals", "instance_to_json", "instance_from_json"]


@dataclass(frozen=True)
class Instance:
    """Base distributions plus the number of copies of each."""

    base: tuple[Distribution, ...]
    copies: int

    @property
    def n(self) -> int:
        return len(self.base)

    @property
    def total_rewards(self) -> int:
        return self.n * self.copies

    @property
    def support_max(self) -> float:
        return max(d.support_max for d in self.base)


def make_instance(base: Sequence[Distribution], k: int) -> Instance:
    if not base:
        raise InvalidInstanceError("instance needs at least one base distribution")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise InvalidInstanceError(f"copy count must be a positive integer, got {k!r}")
    return Instance(tuple(base), int(k))


class OptLaw:
    """Law of the maximum over one copy of each base distribution.

    The CDF is evaluated exactly as the product of the base CDFs; ``dist``
    carries the materialized product (exact at its breakpoints)."""

    def __init__(self, base: Sequence[Distribution]):
        if not base:
            raise InvalidInstanceError("OPT law over an empty base")
        self.base = tuple(base)
        self.dist = product_max(base)
        self.expected_value = self._tail_integral()
        self._quantile_cache: dict[float, RandomizedThreshold] = {}

    # exact product CDF, independent of the materialized grid
    def cdf(self, x: float) -> float:
        out = 1.0
        for d in self.base:
            out *= float(d.cdf(x))
        return out

    def cdf_left(self, x: float) -> float:
        out = 1.0
        for d in self.base:
            out *= d.cdf_left(x)
        return out

    def prob_above(self, x: float) -> float:
        return 1.0 - self.cdf(x)

    @property
    def support_max(self) -> float:
        return max(d.support_max for d in self.base)

    def _tail_integral(self) -> float:
        """E[max] = int_0^xmax (1 - prod_i F_i(x)) dx, exact per segment."""
        grid = np.unique(np.concatenate([[0.0], *[d.xs for d in self.base]]))
        total = 0.0
        # per open segment the product of linear CDF pieces has degree <= n
        nodes, weights = leggauss(len(self.base) // 2 + 2)
        for a, b in zip(grid[:-1], grid[1:]):
            mid, half = (a + b) / 2.0, (b - a) / 2.0
            xs = mid + half * nodes
            vals = np.ones_like(xs)
            for d in self.base:
                vals *= np.asarray(d.cdf(xs))
            total += half * float(np.sum(weights * (1.0 - vals)))
        return total

    def quantile_threshold(self, q: float) -> RandomizedThreshold:
        """(tau, accept_prob) with Pr[OPT rejected] exactly q under the
        randomized-tiebreak semantics (product of per-distribution rejections)."""
        if not (0.0 <= q < 1.0):
            raise InvalidQuantileError(f"quantile must be in [0, 1), got {q!r}")
        hit = self._quantile_cache.get(q)
        if hit is not None:
            return hit
        grid = np.unique(np.concatenate([d.xs for d in self.base]))
        Fr = np.array([self.cdf(x) for x in grid])
        j = int(np.searchsorted(Fr, q, side="left"))
        j = min(j, len(grid) - 1)
        tau = float(grid[j])
        Fl_j = self.cdf_left(tau)
        if j > 0 and Fl_j > q and Fl_j > Fr[j - 1]:
            # crossed strictly inside the segment: bisect the continuous product
            lo, hi = float(grid[j - 1]), tau
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if self.cdf(mid) >= q:
                    hi = mid
                else:
                    lo = mid
            rt = RandomizedThreshold(hi, 0.0)
        else:
            # atom of the product law at tau: solve the accept probability
            lo_a, hi_a = 0.0, 1.0

            def rejected(a: float) -> float:
                out = 1.0
                for d in self.base:
                    out *= d.cdf_left(tau) + (1.0 - a) * d.point_mass(tau)
                return out

            if rejected(0.0) <= q:
                rt = RandomizedThreshold(tau, 0.0)
            elif rejected(1.0) >= q:
                rt = RandomizedThreshold(tau, 1.0)
            else:
                for _ in range(200):
                    mid = 0.5 * (lo_a + hi_a)
                    if mid <= lo_a or mid >= hi_a:
                        break
                    if rejected(mid) > q:
                        lo_a = mid
                    else:
                        hi_a = mid
                rt = RandomizedThreshold(tau, hi_a)
        self._quantile_cache[q] = rt
        return rt


def opt_law(inst: Instance) -> OptLaw:
    """OPT excludes the added copies: the product runs over the base only."""
    return OptLaw(inst.base)


@dataclass(frozen=True)
class ArrivalSequence:
    """One realized draw of all n*k rewards, sorted by arrival time.

    Time ties (possible in floating point) are broken by (identity, copy)
    index order; tied positions are recorded in ``tie_positions``."""

    n: int
    copies: int
    times: np.ndarray
    identities: np.ndarray
    copy_index: np.ndarray
    values: np.ndarray
    tiebreaks: np.ndarray
    tie_positions: tuple[int, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.times)


def sample_arrivals(inst: Instance, rng: np.random.Generator) -> ArrivalSequence:
    n, k = inst.n, inst.copies
    N = n * k
    identities = np.repeat(np.arange(n), k)
    copy_index = np.tile(np.arange(k), n)
    times = rng.random(N)
    values = np.empty(N)
    for i, d in enumerate(inst.base):
        values[identities == i] = d.sample_values(rng, k)
    tiebreaks = rng.random(N)
    order = np.lexsort((copy_index, identities, times))
    ts = times[order]
    ties = tuple(int(p) for p in np.nonzero(np.diff(ts) == 0)[0])
    return ArrivalSequence(
        n=n,
        copies=k,
        times=ts,
        identities=identities[order],
        copy_index=copy_index[order],
        values=values[order],
        tiebreaks=tiebreaks[order],
        tie_positions=ties,
    )


# --------------------------------------------------------------------- JSON


def instance_to_json(inst: Instance) -> dict:
    return {"base": [distribution_to_json(d) for d in inst.base], "copies": inst.copies}


def instance_from_json(obj: dict) -> Instance:
    try:
        base = [distribution_from_json(d) for d in obj["base"]]
        copies = int(obj["copies"])
    except (TypeError, KeyError) as exc:
        raise InvalidInstanceError(f"instance JSON needs 'base' and 'copies': {exc}") from exc
    return make_instance(base, copies)


def load_instance(path: str) -> Instance:
    with open(path) as fh:
        return instance_from_json(json.load(fh))
