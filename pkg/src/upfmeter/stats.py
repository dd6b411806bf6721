"""Mergeable streaming delay statistics.

Delays are non-negative integer nanoseconds binned into a fixed
log-linear layout: exact unit bins below 100 ns, then 900 bins per
decade (three significant digits) up to 10 s, with explicit underflow
(zero) and overflow bins. Three digits keep the quantile error under 1%
relative while the whole histogram stays a few thousand counters, so
tens of millions of samples ingest in seconds and per-namespace feeds
merge bin-exactly.

Each bin also accumulates the sum of its observations; quantiles report
the observed mean of the selected bin, which reproduces discrete inputs
exactly and stays inside the bin for continuous ones.

A DelayStats value is single-writer; parallel feeds own private
instances and merge at aggregation points.
"""

from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

from .errors import EmptyStats, InvalidQuantile, LayoutMismatch, NegativeDelay


class HistogramLayout:
    """Fixed bin-edge layout shared by every histogram that merges."""

    def __init__(self, significant_digits: int = 3, max_value: int = 10_000_000_000):
        if significant_digits < 2:
            raise ValueError("need at least 2 significant digits")
        if max_value < 10 ** significant_digits:
            raise ValueError("max_value below one full decade")
        self.significant_digits = significant_digits
        self.max_value = max_value
        base = 10 ** (significant_digits - 1)
        lowers = [0]                      # underflow: exactly zero
        lowers.extend(range(1, base))     # unit-width region
        scale = 1
        while base * scale <= max_value:
            for mantissa in range(base, 10 * base):
                lo = mantissa * scale
                if lo > max_value:
                    break
                lowers.append(lo)
            scale *= 10
        lowers.append(max_value + 1)      # overflow
        self.lowers = np.asarray(lowers, dtype=np.int64)
        self._lowers_list = lowers
        self.nbins = len(lowers)

    def index(self, value: int) -> int:
        return bisect_right(self._lowers_list, value) - 1

    def index_many(self, values: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.lowers, values, side="right") - 1

    def bin_bounds(self, index: int) -> tuple[int, int | None]:
        """Inclusive (lower, upper) of a bin; upper is None for overflow."""
        lo = int(self.lowers[index])
        if index + 1 < self.nbins:
            return lo, int(self.lowers[index + 1]) - 1
        return lo, None

    def bin_width_at(self, value: int) -> int:
        lo, hi = self.bin_bounds(self.index(value))
        return (hi - lo + 1) if hi is not None else 1

    def __eq__(self, other):
        return (isinstance(other, HistogramLayout)
                and self.significant_digits == other.significant_digits
                and self.max_value == other.max_value)

    def __hash__(self):
        return hash((self.significant_digits, self.max_value))


DEFAULT_LAYOUT = HistogramLayout()


class DelayStats:
    """Histogram summary of a delay stream: count, mean, max, quantiles."""

    def __init__(self, layout: HistogramLayout = DEFAULT_LAYOUT):
        self.layout = layout
        self._counts = np.zeros(layout.nbins, dtype=np.int64)
        self._sums = np.zeros(layout.nbins, dtype=np.float64)
        self._count = 0
        self._sum = 0
        self._max = 0

    @property
    def count(self) -> int:
        return self._count

    @property
    def sum(self) -> int:
        return self._sum

    @property
    def max(self) -> int:
        if self._count == 0:
            raise EmptyStats("no observations")
        return self._max

    @property
    def mean(self) -> float:
        if self._count == 0:
            raise EmptyStats("no observations")
        return self._sum / self._count

    def observe(self, delay: int) -> None:
        """Record one delay sample."""
        if delay < 0:
            raise NegativeDelay(f"delay {delay} < 0")
        idx = self.layout.index(delay)
        self._counts[idx] += 1
        self._sums[idx] += delay
        self._count += 1
        self._sum += delay
        if delay > self._max:
            self._max = delay

    def observe_many(self, delays) -> None:
        """Record a batch of delay samples (vectorised ingest path)."""
        values = np.asarray(delays, dtype=np.int64)
        if values.size == 0:
            return
        if int(values.min()) < 0:
            raise NegativeDelay("batch contains negative delays")
        idx = self.layout.index_many(values)
        self._counts += np.bincount(idx, minlength=self.layout.nbins)
        self._sums += np.bincount(idx, weights=values,
                                  minlength=self.layout.nbins)
        self._count += int(values.size)
        self._sum += int(values.sum(dtype=np.int64))
        peak = int(values.max())
        if peak > self._max:
            self._max = peak

    def quantile(self, q: float) -> int:
        """Nearest-rank quantile: the observed mean of the first bin whose
        cumulative count reaches ceil(q * count). The result is always
        inside that bin, so the error against an exact sorted quantile is
        below one bin width at that magnitude."""
        if not 0.0 <= q <= 1.0:
            raise InvalidQuantile(f"q={q} outside [0, 1]")
        if self._count == 0:
            raise EmptyStats("quantile of empty stats")
        rank = max(1, math.ceil(q * self._count))
        cum = np.cumsum(self._counts)
        idx = int(np.searchsorted(cum, rank, side="left"))
        return int(round(self._sums[idx] / self._counts[idx]))

    def cdf_points(self, resolution: int = 200) -> list[tuple[int, float]]:
        """Downsample the empirical CDF to at most `resolution` points.

        Interior points sit on bin upper edges, where the cumulative
        fraction is exact; the final point is always (max, 1.0).
        """
        if resolution < 1:
            raise ValueError(f"resolution must be >= 1, got {resolution}")
        if self._count == 0:
            raise EmptyStats("cdf of empty stats")
        occupied = np.nonzero(self._counts)[0]
        fractions = np.cumsum(self._counts[occupied]) / self._count
        n = len(occupied)
        if resolution >= n:
            picks = range(n)
        else:
            picks = sorted({math.ceil((i + 1) * n / resolution) - 1
                            for i in range(resolution)})
        points = []
        for i in picks:
            if i == n - 1:
                points.append((self._max, 1.0))
            else:
                _, hi = self.layout.bin_bounds(int(occupied[i]))
                points.append((hi, float(fractions[i])))
        return points

    def summary(self) -> dict:
        """Plain-number digest for JSON outputs and tables."""
        if self._count == 0:
            return {"count": 0}
        return {
            "count": self._count,
            "mean_ns": self.mean,
            "p50_ns": self.quantile(0.50),
            "p99_ns": self.quantile(0.99),
            "max_ns": self._max,
        }


def merge(a: DelayStats, b: DelayStats) -> DelayStats:
    """Bin-wise sum of two histograms; equals observing the concatenated
    stream. Layouts must be identical."""
    if a.layout != b.layout:
        raise LayoutMismatch("histogram layouts differ")
    out = DelayStats(a.layout)
    out._counts = a._counts + b._counts
    out._sums = a._sums + b._sums
    out._count = a._count + b._count
    out._sum = a._sum + b._sum
    out._max = max(a._max, b._max)
    return out
