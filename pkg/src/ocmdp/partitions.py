"""Integer intervals of counter values and partitions made of them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

from .model import INF, Bound, ModelError, is_inf


@dataclass(frozen=True, order=True)
class Interval:
    """The integer interval ``[lo, hi]``; ``hi`` may be ``INF``."""

    lo: int
    hi: Bound

    def __post_init__(self) -> None:
        if self.lo < 1:
            raise ModelError(f"interval lower bound must be >= 1, got {self.lo}")
        if self.hi < self.lo:
            raise ModelError(f"empty interval [{self.lo},{self.hi}]")

    @property
    def bounded(self) -> bool:
        return not is_inf(self.hi)

    def __len__(self) -> int:
        if not self.bounded:
            raise ValueError("unbounded interval has no finite size")
        return int(self.hi) - self.lo + 1

    def __contains__(self, k: object) -> bool:
        return isinstance(k, int) and self.lo <= k <= self.hi

    @property
    def beta(self) -> int:
        """``log2(|I| + 1)``; only meaningful for refined intervals."""
        n = len(self) + 1
        if n & (n - 1):
            raise ModelError(f"interval {self} has size {n - 1}, not of the form 2^b - 1")
        return n.bit_length() - 1

    def __str__(self) -> str:
        return f"{self.lo}-{'inf' if not self.bounded else self.hi}"


@dataclass(frozen=True)
class IntervalPartition:
    """Sorted contiguous intervals covering ``[1, B-1]``."""

    intervals: Tuple[Interval, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "intervals", tuple(self.intervals))
        nxt = 1
        for i, iv in enumerate(self.intervals):
            if iv.lo != nxt:
                raise ModelError(f"partition not contiguous at {iv}")
            if not iv.bounded and i != len(self.intervals) - 1:
                raise ModelError("only the last interval may be unbounded")
            nxt = iv.hi + 1 if iv.bounded else INF

    @property
    def bound(self) -> Bound:
        """The counter bound ``B`` such that the partition covers ``[1, B-1]``."""
        if not self.intervals:
            return 1
        last = self.intervals[-1]
        return INF if not last.bounded else int(last.hi) + 1

    def index_of(self, k: int) -> int:
        lo, hi = 0, len(self.intervals) - 1
        while lo <= hi:
            mid = (lo + hi) // 2
            iv = self.intervals[mid]
            if k < iv.lo:
                hi = mid - 1
            elif k > iv.hi:
                lo = mid + 1
            else:
                return mid
        raise ModelError(f"counter value {k} not covered by partition {self}")

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def __str__(self) -> str:
        return ",".join(str(iv) for iv in self.intervals)


@dataclass(frozen=True)
class PeriodicPartition:
    """A period ``rho`` and a window partition of ``[1, rho]``."""

    period: int
    window: IntervalPartition

    def __post_init__(self) -> None:
        if self.period < 1:
            raise ModelError("period must be >= 1")
        if self.window.bound != self.period + 1:
            raise ModelError(f"window {self.window} does not cover [1,{self.period}]")

    def __str__(self) -> str:
        return f"period={self.period}; window={self.window}"


def partition(*pairs: Tuple[int, Bound]) -> IntervalPartition:
    return IntervalPartition(tuple(Interval(lo, hi) for lo, hi in pairs))


def refine(i: Interval) -> List[Interval]:
    """Split a bounded interval into pieces of sizes ``2^b - 1``.

    Each step takes the largest ``l`` with ``2^l - 1 <= |I|``; the lowest
    ``2^l - 1`` values form one piece and the rest is split again.
    Unbounded intervals are returned unchanged.
    """
    if not i.bounded:
        return [i]
    out: List[Interval] = []
    lo, hi = i.lo, int(i.hi)
    while lo <= hi:
        ell = (hi - lo + 2).bit_length() - 1
        size = (1 << ell) - 1
        out.append(Interval(lo, lo + size - 1))
        lo += size
    return out


def isolate(p: IntervalPartition, k: int) -> IntervalPartition:
    """Split the interval containing ``k`` so that ``k`` is an upper bound."""
    out: List[Interval] = []
    for iv in p.intervals:
        if k in iv and k != iv.hi:
            out.append(Interval(iv.lo, k))
            out.append(Interval(k + 1, iv.hi))
        else:
            out.append(iv)
    return IntervalPartition(tuple(out))


def refine_partition(p: IntervalPartition) -> IntervalPartition:
    return IntervalPartition(tuple(j for iv in p.intervals for j in refine(iv)))


def is_refined(p: IntervalPartition) -> bool:
    for iv in p.intervals:
        if iv.bounded:
            n = len(iv) + 1
            if n & (n - 1):
                return False
    return True


def _compositions(total: int, parts_max: int, size_max: int) -> Iterator[Tuple[int, ...]]:
    """Compositions of ``total`` into at most ``parts_max`` parts of size at most
    ``size_max``, in lexicographic order of the part sequence."""
    if total == 0:
        yield ()
        return
    if parts_max == 0:
        return
    for first in range(1, min(size_max, total) + 1):
        for rest in _compositions(total - first, parts_max - 1, size_max):
            yield (first,) + rest


def _prefixes(parts_max: int, size_max: int) -> Iterator[Tuple[int, ...]]:
    """All sequences of at most ``parts_max`` parts in ``[1, size_max]``, in
    lexicographic order."""
    yield ()
    if parts_max == 0:
        return
    for first in range(1, size_max + 1):
        for rest in _prefixes(parts_max - 1, size_max):
            yield (first,) + rest


def _from_lengths(lengths: Sequence[int], tail: bool) -> IntervalPartition:
    out = []
    lo = 1
    for n in lengths:
        out.append(Interval(lo, lo + n - 1))
        lo += n
    if tail:
        out.append(Interval(lo, INF))
    return IntervalPartition(tuple(out))


def enumerate_partitions(d: int, n: int, bound: Bound) -> Iterator[IntervalPartition]:
    """Partitions of ``[1, B-1]`` with at most ``d`` intervals, every bounded
    one of size at most ``n``.

    Order is lexicographic in the sequence of interval lengths.  When ``B`` is
    infinite the last interval is unbounded and exempt from ``n``.
    """
    if d < 1 or n < 1:
        raise ModelError("d and n must be >= 1")
    if is_inf(bound):
        for lengths in _prefixes(d - 1, n):
            yield _from_lengths(lengths, tail=True)
        return
    total = int(bound) - 1
    if total > d * n:
        return
    for lengths in _compositions(total, d, n):
        yield _from_lengths(lengths, tail=False)


def expand_periodic(pp: PeriodicPartition, upto: int) -> IntervalPartition:
    """Tile ``[1, upto]`` with shifted copies of the window.

    ``upto`` is rounded up to a multiple of the period.
    """
    rho = pp.period
    reps = -(-upto // rho)
    out = []
    for r in range(reps):
        for iv in pp.window.intervals:
            out.append(Interval(iv.lo + r * rho, int(iv.hi) + r * rho))
    return IntervalPartition(tuple(out))


def parse_partition(text: str) -> IntervalPartition:
    """Parse ``"1-3,4-inf"``; an empty string is the empty partition."""
    text = text.strip()
    if not text:
        return IntervalPartition(())
    return IntervalPartition(tuple(parse_interval(chunk) for chunk in text.split(",")))


def parse_interval(text: str) -> Interval:
    """Parse ``"4-9"``, ``"8-inf"`` or a single value ``"5"``."""
    chunk = text.strip()
    lo_s, sep, hi_s = chunk.partition("-")
    if not sep:
        lo_s = hi_s = chunk
    try:
        lo = int(lo_s)
        hi: Bound = INF if hi_s.strip() == "inf" else int(hi_s)
    except ValueError:
        raise ModelError(f"bad interval {chunk!r}") from None
    return Interval(lo, hi)


def parse_periodic(text: str) -> PeriodicPartition:
    """Parse ``"period=3; window=1-1,2-3"``."""
    fields = {}
    for part in text.split(";"):
        key, sep, val = part.partition("=")
        if not sep:
            raise ModelError(f"bad periodic partition field {part!r}")
        fields[key.strip()] = val.strip()
    try:
        rho = int(fields["period"])
        window = parse_partition(fields["window"])
    except (KeyError, ValueError):
        raise ModelError(f"bad periodic partition {text!r}") from None
    return PeriodicPartition(rho, window)


def window_for(pp: PeriodicPartition, k: int) -> int:
    """Index of the window interval holding ``k`` reduced into ``[1, rho]``."""
    return pp.window.index_of((k - 1) % pp.period + 1)
