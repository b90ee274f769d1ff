"""Measurement helpers: correlation, histograms, least-squares fits,
nearest-neighbor deception scoring, and Monte-Carlo checks of the
expectation bounds for random non-negative Gram magnitudes.

The bounds being verified: write E[(A-B)^2] = mu_A^2 + sigma_A^2 + mu_B^2 +
sigma_B^2 - 2 E[AB]. For non-negative A and B the cross moment E[AB] is
itself non-negative, so dropping it gives an upper bound; for independent A
and B it equals mu_A mu_B, which makes the lower edge exact:

    (mu_A - mu_B)^2 + sigma_A^2 + sigma_B^2  <=  E[(A-B)^2]
                                             <=  mu_A^2 + sigma_A^2 + mu_B^2 + sigma_B^2.

The sampler draws A and B independently, so the estimate concentrates at
the lower edge and the containment test is one-sided-binding there. A
coarser variance-free relaxation replaces the spread terms with a
user-supplied ratio k: (mu_A - mu_B)^2 <= E <= k (mu_A^2 + mu_B^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DataError, DimensionError, PreconditionError
from .validation import check_count, check_positive

SCORE_VALUES = (-1, 0, 1)


# ---------------------------------------------------------------------------
# elementary statistics


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample correlation coefficient, clamped to [-1, 1].

    Needs at least two points and non-constant inputs on both sides.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or ya.ndim != 1:
        raise DimensionError("pearson expects one-dimensional sequences")
    if xa.size != ya.size:
        raise DimensionError(f"pearson lengths differ: {xa.size} vs {ya.size}")
    if xa.size < 2:
        raise PreconditionError("correlation is undefined for fewer than two points")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sx = float(np.sum(dx * dx))
    sy = float(np.sum(dy * dy))
    if sx == 0.0 or sy == 0.0:
        raise PreconditionError("correlation is undefined for constant input")
    # sqrt of the product (not a product of sqrts): when dy is an exact
    # multiple of dx this cancels bit-exactly, so affine data gives r == 1.0.
    r = float(np.sum(dx * dy)) / math.sqrt(sx * sy)
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class Histogram:
    """Equal-width bin counts over [lo, hi] plus out-of-range tallies.

    Bins are half-open [edge_i, edge_{i+1}) except the last, which includes
    hi. Values below lo and above hi land in underflow/overflow instead.
    """

    counts: tuple[int, ...]
    underflow: int
    overflow: int
    lo: float
    hi: float

    @property
    def bins(self) -> int:
        return len(self.counts)

    def edges(self) -> list[float]:
        width = (self.hi - self.lo) / self.bins
        return [self.lo + i * width for i in range(self.bins)] + [self.hi]


def histogram(values: Sequence[float], bins: int, lo: float, hi: float) -> Histogram:
    """Count ``values`` into ``bins`` equal-width bins spanning [lo, hi]."""
    bins = check_count(bins, "bins", minimum=1)
    lo = float(lo)
    hi = float(hi)
    if not hi > lo:
        raise PreconditionError(f"histogram range is empty: lo={lo}, hi={hi}")
    counts = [0] * bins
    under = over = 0
    width = hi - lo
    for v in np.asarray(values, dtype=np.float64).reshape(-1):
        if v < lo:
            under += 1
        elif v > hi:
            over += 1
        else:
            idx = int((v - lo) / width * bins)
            if idx >= bins:  # v == hi, or the last-ulp rounding of it
                idx = bins - 1
            counts[idx] += 1
    return Histogram(tuple(counts), under, over, lo, hi)


def linear_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line through (x, y): returns (slope, intercept, r).

    Shares pearson's preconditions, so either side being constant is an
    error rather than a degenerate fit.
    """
    r = pearson(x, y)
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    dx = xa - xa.mean()
    slope = float(np.sum(dx * (ya - ya.mean()))) / float(np.sum(dx * dx))
    intercept = float(ya.mean()) - slope * float(xa.mean())
    return slope, intercept, r


# ---------------------------------------------------------------------------
# deception rate


@dataclass(frozen=True)
class FeatureBankEntry:
    """One labeled feature vector."""

    id: str
    artist: str
    vector: np.ndarray


@dataclass(frozen=True)
class FeatureBank:
    """Parallel ids/artists/vectors for a gallery of feature vectors."""

    ids: tuple[str, ...]
    artists: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        arr = np.array(self.vectors, dtype=np.float64, order="C")
        if arr.ndim != 2:
            raise DimensionError(f"feature bank vectors must be 2-D, got shape {arr.shape}")
        ids = tuple(str(i) for i in self.ids)
        artists = tuple(str(a) for a in self.artists)
        if not (len(ids) == len(artists) == arr.shape[0]):
            raise DimensionError(
                f"bank lengths disagree: {len(ids)} ids, {len(artists)} artists, "
                f"{arr.shape[0]} vectors")
        if arr.shape[0] == 0:
            raise PreconditionError("feature bank must contain at least one entry")
        if len(set(ids)) != len(ids):
            raise PreconditionError("feature bank ids must be unique")
        arr.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "artists", artists)
        object.__setattr__(self, "vectors", arr)

    def __len__(self) -> int:
        return len(self.ids)

    def entry(self, i: int) -> FeatureBankEntry:
        return FeatureBankEntry(self.ids[i], self.artists[i], self.vectors[i])


def nearest_style_ids(stylized: FeatureBank, styles: FeatureBank) -> list[str]:
    """For each stylized vector, the id of its L2-nearest style vector.

    Exact distance ties resolve to the lexicographically smallest id so the
    result is order-independent. The gallery is searched in full; a style
    vector identical to the query is a legitimate (distance zero) winner.
    """
    if stylized.vectors.shape[1] != styles.vectors.shape[1]:
        raise DimensionError(
            f"feature dimensions differ: {stylized.vectors.shape[1]} vs "
            f"{styles.vectors.shape[1]}")
    out = []
    for v in stylized.vectors:
        diff = styles.vectors - v
        d2 = np.einsum("ij,ij->i", diff, diff)
        best = d2.min()
        tied = [styles.ids[j] for j in np.flatnonzero(d2 == best)]
        out.append(min(tied))
    return out


def deception_rate(stylized: FeatureBank, styles: FeatureBank) -> float:
    """Fraction of stylized entries whose nearest style shares their artist."""
    winners = nearest_style_ids(stylized, styles)
    by_id = {sid: artist for sid, artist in zip(styles.ids, styles.artists)}
    hits = sum(1 for artist, win in zip(stylized.artists, winners) if by_id[win] == artist)
    return hits / len(stylized)


# ---------------------------------------------------------------------------
# correlation against human annotations


@dataclass(frozen=True)
class AnnotationRecord:
    """One human judgment: -1 (worse), 0 (tie), or 1 (better)."""

    id: str
    score: int

    def __post_init__(self):
        if self.score not in SCORE_VALUES:
            raise DataError(f"annotation score must be one of {SCORE_VALUES}, "
                            f"got {self.score!r} for id {self.id!r}")


@dataclass(frozen=True)
class LossTable:
    """Per-sample loss values, one column per tap plus any totals column."""

    ids: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, order="C")
        ids = tuple(str(i) for i in self.ids)
        cols = tuple(str(c) for c in self.columns)
        if arr.ndim != 2 or arr.shape != (len(ids), len(cols)):
            raise DimensionError(
                f"values shape {arr.shape} does not match {len(ids)} ids x {len(cols)} columns")
        if len(set(ids)) != len(ids):
            raise DataError("loss table ids must be unique")
        arr.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "values", arr)


def correlation_report(table: LossTable, annotations: Sequence[AnnotationRecord]) -> dict[str, float]:
    """Pearson r of every loss column against the annotation scores.

    The annotation ids must match the table ids one-to-one; anything
    missing, extra, or duplicated is reported by id.
    """
    scores: dict[str, int] = {}
    for rec in annotations:
        if rec.id in scores:
            raise DataError(f"duplicate annotation id {rec.id!r}")
        scores[rec.id] = rec.score
    missing = [i for i in table.ids if i not in scores]
    extra = [i for i in scores if i not in set(table.ids)]
    if missing or extra:
        raise DataError(
            "annotation join failed; missing ids: "
            f"{missing or 'none'}; unmatched annotation ids: {extra or 'none'}")
    y = [scores[i] for i in table.ids]
    return {col: pearson(table.values[:, j], y) for j, col in enumerate(table.columns)}


# ---------------------------------------------------------------------------
# Monte-Carlo verification of the expectation bounds


@dataclass(frozen=True)
class MomentSpec:
    """A non-negative scalar distribution with known mean and spread.

    Construct through :meth:`discrete`, :meth:`point`, or :meth:`uniform`
    so that mu/sigma always agree with the sampler analytically.
    """

    mu: float
    sigma: float
    kind: str
    params: tuple

    @classmethod
    def discrete(cls, values: Sequence[float], probs: Sequence[float] | None = None) -> "MomentSpec":
        vals = tuple(float(v) for v in values)
        if not vals:
            raise PreconditionError("discrete spec needs at least one value")
        if any(v < 0.0 for v in vals):
            raise PreconditionError("Gram magnitudes are non-negative; negative support rejected")
        if probs is None:
            p = tuple(1.0 / len(vals) for _ in vals)
        else:
            p = tuple(float(q) for q in probs)
            if len(p) != len(vals):
                raise DimensionError(f"{len(vals)} values but {len(p)} probabilities")
            if any(q < 0.0 for q in p):
                raise PreconditionError("probabilities must be non-negative")
            if abs(sum(p) - 1.0) > 1e-9:
                raise PreconditionError(f"probabilities must sum to 1, got {sum(p)}")
        mu = sum(v * q for v, q in zip(vals, p))
        var = sum((v - mu) ** 2 * q for v, q in zip(vals, p))
        return cls(mu=mu, sigma=float(np.sqrt(var)), kind="discrete", params=(vals, p))

    @classmethod
    def point(cls, value: float) -> "MomentSpec":
        return cls.discrete([value])

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "MomentSpec":
        lo = float(lo)
        hi = float(hi)
        if lo < 0.0:
            raise PreconditionError("Gram magnitudes are non-negative; negative support rejected")
        if not hi > lo:
            raise PreconditionError(f"uniform spec needs hi > lo, got [{lo}, {hi}]")
        mu = 0.5 * (lo + hi)
        sigma = (hi - lo) / np.sqrt(12.0)
        return cls(mu=mu, sigma=float(sigma), kind="uniform", params=(lo, hi))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "discrete":
            vals, p = self.params
            return rng.choice(np.asarray(vals, dtype=np.float64), size=n, p=np.asarray(p))
        lo, hi = self.params
        return rng.uniform(lo, hi, size=n)


def expectation_bounds(a: MomentSpec, b: MomentSpec) -> tuple[float, float]:
    """Analytic bounds on E[(A - B)^2] for independent non-negative A, B."""
    lower = (a.mu - b.mu) ** 2 + a.sigma ** 2 + b.sigma ** 2
    upper = a.mu ** 2 + a.sigma ** 2 + b.mu ** 2 + b.sigma ** 2
    return lower, upper


@dataclass(frozen=True)
class McBoundsResult:
    estimate: float
    stderr: float
    lower: float
    upper: float
    within: bool


def mc_expectation_bounds(a: MomentSpec, b: MomentSpec, trials: int = 100_000,
                          seed: int = 0) -> McBoundsResult:
    """Estimate E[(A - B)^2] by simulation and test it against the bounds.

    A and B are drawn independently (one generator, disjoint draws), which
    is exactly the regime the bounds assume. ``within`` allows the estimate
    a 3-standard-error margin on both sides, plus a small relative slack:
    for degenerate (zero-variance) spec pairs the standard error vanishes
    and the averaged estimate can land one rounding step below the exactly
    attained lower bound, which is not a containment failure.
    """
    trials = check_count(trials, "trials", minimum=1000)
    rng = np.random.default_rng(seed)
    ga = a.sample(rng, trials)
    gb = b.sample(rng, trials)
    d2 = (ga - gb) ** 2
    est = float(d2.mean())
    se = float(d2.std(ddof=1)) / float(np.sqrt(trials))
    lower, upper = expectation_bounds(a, b)
    slack = 3.0 * se + 1e-9 * max(1.0, abs(lower), abs(upper))
    within = (est >= lower - slack) and (est <= upper + slack)
    return McBoundsResult(estimate=est, stderr=se, lower=lower, upper=upper, within=within)


def relaxed_bounds(a: MomentSpec, b: MomentSpec, k: float) -> tuple[float, float]:
    """Variance-free relaxation: (mu_A - mu_B)^2 <= E <= k (mu_A^2 + mu_B^2).

    ``k`` expresses how large E[X^2] may be relative to mu^2 for the
    distributions at hand; it is supplied by the caller, never estimated.
    """
    k = check_positive(k, "k")
    return (a.mu - b.mu) ** 2, k * (a.mu ** 2 + b.mu ** 2)
