"""Correlation checks: human ratings, similarity benchmarks, opinion series.

All checks reduce to Pearson correlations. Rated word sets carry a
higher_means field naming which gender a high score points to; scores
are flipped to male-positive before correlating so signs line up with
the bias convention.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .embedding import EmbeddingModel, cosine


@dataclass
class RatedWordSet:
    """Human-scored words: (word, score) rows plus scale metadata."""

    rows: list[tuple[str, float]]
    scale: str = ""
    source: str = ""
    higher_means: str = "male"

    def __post_init__(self):
        if not self.rows:
            raise ValueError("rated word set is empty")
        words = [w for w, _ in self.rows]
        if len(set(words)) != len(words):
            raise ValueError("rated word set has duplicate words")
        if self.higher_means not in ("male", "female"):
            raise ValueError("higher_means must be 'male' or 'female'")

    def male_positive_scores(self) -> dict[str, float]:
        sign = 1.0 if self.higher_means == "male" else -1.0
        return {w: sign * s for w, s in self.rows}


def load_rated_words(path: str | Path) -> RatedWordSet:
    """Read a rated-word CSV: '# key = value' metadata, then word,score."""
    meta = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        reader = None
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    meta[key.strip()] = value.strip()
                continue
            if reader is None and line.lower().replace(" ", "") \
                    .startswith("word,"):
                reader = True
                continue
            word, score = line.split(",", 1)
            rows.append((word.strip().lower(), float(score)))
    return RatedWordSet(rows=rows, scale=meta.get("scale", ""),
                        source=meta.get("source", ""),
                        higher_means=meta.get("higher_means", "male"))


@dataclass
class OpinionSeries:
    """Share of poll respondents choosing women, per period."""

    rows: list[tuple[int, float]]

    def __post_init__(self):
        starts = [p for p, _ in self.rows]
        if starts != sorted(set(starts)):
            raise ValueError("periods must be strictly increasing")
        if any(not 0 <= s <= 1 for _, s in self.rows):
            raise ValueError("shares must lie in [0, 1]")

    def as_dict(self) -> dict[int, float]:
        return dict(self.rows)


def load_opinion_series(path: str | Path) -> OpinionSeries:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for rec in csv.DictReader(
                line for line in fh if not line.startswith("#")):
            rows.append((int(rec["period_start"]),
                         float(rec["share_women"])))
    return OpinionSeries(rows=rows)


def pearson(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Sample Pearson r with a two-sided t-test p-value on n-2 df."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length 1-d sequences")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("zero variance in input")
    r = float(dx @ dy / math.sqrt(sxx * syy))
    r = max(-1.0, min(1.0, r))
    if 1.0 - r * r < 1e-15:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, float(2.0 * stats.t.sf(abs(t), n - 2))


def embedding_vs_ratings(bias_scores: dict[str, float],
                         rated: RatedWordSet) -> tuple[float, float, int]:
    """Correlate per-word embedding bias with human-coded gender scores."""
    human = rated.male_positive_scores()
    matched = sorted(w for w in human if w in bias_scores)
    if len(matched) < 3:
        raise ValueError(
            f"only {len(matched)} rated words matched; need at least 3")
    r, p = pearson([bias_scores[w] for w in matched],
                   [human[w] for w in matched])
    return r, p, len(matched)


def load_word_pairs(path: str | Path) -> list[tuple[str, str, float]]:
    """Read 'w1 w2 score' lines (the similarity-benchmark exchange format)."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            w1, w2, score = line.split()
            pairs.append((w1.lower(), w2.lower(), float(score)))
    return pairs


def men_benchmark(model: EmbeddingModel,
                  pairs: Sequence[tuple[str, str, float]],
                  min_pairs: int = 10) -> tuple[float, float, float]:
    """Correlate model cosine with human pair similarity.

    Returns (r, p, coverage) where coverage is the in-vocabulary share
    of the given pairs. Errors when fewer than min_pairs are covered.
    """
    if not pairs:
        raise ValueError("no pairs given")
    covered = [(w1, w2, s) for w1, w2, s in pairs
               if w1 in model and w2 in model]
    coverage = len(covered) / len(pairs)
    if len(covered) < min_pairs:
        raise ValueError(
            f"only {len(covered)}/{len(pairs)} pairs covered "
            f"(coverage {coverage:.1%}); need {min_pairs}")
    model_sims = [cosine(model.vector(w1), model.vector(w2))
                  for w1, w2, _ in covered]
    human = [s for _, _, s in covered]
    r, p = pearson(model_sims, human)
    return r, p, coverage


@dataclass(frozen=True)
class LeadLagAlignment:
    r: float            # bias (male-positive) vs. women-share, as given
    r_oriented: float   # with bias negated, i.e. pro-female orientation
    p: float
    n: int


@dataclass
class LeadLagResult:
    levels: dict[str, LeadLagAlignment]
    diffs: Optional[dict[str, LeadLagAlignment]]


def _align(series: dict[int, float], opinion: dict[int, float],
           shift: int) -> tuple[list[float], list[float]]:
    xs, ys = [], []
    for period, value in sorted(series.items()):
        key = period + shift
        if key in opinion:
            xs.append(value)
            ys.append(opinion[key])
    return xs, ys


def _diff(series: dict[int, float], width: int) -> dict[int, float]:
    return {p: series[p] - series[p - width]
            for p in series if p - width in series}


def lead_lag(bias_by_period: dict[int, float],
             opinion: OpinionSeries) -> LeadLagResult:
    """Correlate a bias series against preceding/same/subsequent opinion.

    Bias periods must be uniformly spaced; the spacing defines one period
    of lead or lag. Levels require at least 3 aligned pairs per shift;
    first differences are reported too when they have enough overlap.
    """
    periods = sorted(bias_by_period)
    if len(periods) < 3:
        raise ValueError("need at least 3 bias periods")
    widths = {b - a for a, b in zip(periods, periods[1:])}
    if len(widths) != 1:
        raise ValueError(f"bias periods are not uniformly spaced: {periods}")
    width = widths.pop()
    table = opinion.as_dict()

    shifts = {"preceding": -width, "simultaneous": 0, "subsequent": width}
    levels = {}
    for name, shift in shifts.items():
        xs, ys = _align(bias_by_period, table, shift)
        if len(xs) < 3:
            raise ValueError(
                f"only {len(xs)} aligned pairs for {name} opinion; need 3")
        r, p = pearson(xs, ys)
        levels[name] = LeadLagAlignment(r=r, r_oriented=-r, p=p, n=len(xs))

    diffs = {}
    d_bias = _diff(bias_by_period, width)
    d_opinion = _diff(table, width)
    for name, shift in shifts.items():
        xs, ys = _align(d_bias, d_opinion, shift)
        if len(xs) < 3:
            diffs = None
            break
        r, p = pearson(xs, ys)
        diffs[name] = LeadLagAlignment(r=r, r_oriented=-r, p=p, n=len(xs))
    return LeadLagResult(levels=levels, diffs=diffs)
