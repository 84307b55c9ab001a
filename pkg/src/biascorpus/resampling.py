"""Genre-balanced resampling with repeat-and-average orchestration.

Two modes: undersample draws the minimum genre count from every active
genre; popularity sampling draws genres proportionally to their chart
share, anchored so the most-demanded genre is used in full. Analyses run
on many resampled corpora and average, since a single draw is noisy.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .bias import BiasSeries
from .corpus import BucketCorpus, SongRecord

# Genres that enter the data late are sampled only from these years on.
GENRE_ACTIVATION = {"dance": 1980, "rap": 1990}


def active_genres(bucket_start: int,
                  genres: Sequence[str]) -> tuple[str, ...]:
    """Genres eligible for sampling in a bucket, by activation year."""
    return tuple(g for g in genres
                 if GENRE_ACTIVATION.get(g, -10_000) <= bucket_start)


@dataclass
class SamplePlan:
    """How to resample: mode, repeat count, seed, per-bucket genre quotas."""

    mode: str
    repeats: int = 100
    seed: int = 0
    quotas: dict[int, dict[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("undersample", "popularity"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        for bucket, by_genre in self.quotas.items():
            if any(q < 0 for q in by_genre.values()):
                raise ValueError(f"negative quota in bucket {bucket}")
            if self.mode == "undersample" and len(set(by_genre.values())) > 1:
                raise ValueError(
                    f"undersample quotas must be equal within bucket "
                    f"{bucket}: {by_genre}")


@dataclass
class PopularityTable:
    """Chart share per (bucket, genre); shares in a bucket sum to 1."""

    rows: list[tuple[int, str, float]]

    def __post_init__(self):
        sums: dict[int, float] = {}
        for bucket, genre, share in self.rows:
            if not 0 <= share <= 1:
                raise ValueError(
                    f"share {share} for ({bucket}, {genre}) not in [0,1]")
            sums[bucket] = sums.get(bucket, 0.0) + share
        for bucket, total in sums.items():
            if abs(total - 1.0) > 1e-9:
                raise ValueError(
                    f"shares for bucket {bucket} sum to {total}, not 1")

    def shares_for(self, bucket_start: int) -> dict[str, float]:
        return {g: s for b, g, s in self.rows if b == bucket_start}


def load_popularity_table(path: str | Path) -> PopularityTable:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for rec in csv.DictReader(
                line for line in fh if not line.startswith("#")):
            rows.append((int(rec["bucket_start"]), rec["genre"].strip(),
                         float(rec["share"])))
    return PopularityTable(rows=rows)


def _by_genre(bucket: BucketCorpus) -> dict[str, list[SongRecord]]:
    groups: dict[str, list[SongRecord]] = {}
    for rec in bucket.records:
        groups.setdefault(rec.genre, []).append(rec)
    return groups


def _draw(records: list[SongRecord], k: int,
          rng: np.random.Generator) -> list[SongRecord]:
    if k >= len(records):
        return list(records)
    idx = rng.choice(len(records), size=k, replace=False)
    return [records[i] for i in sorted(idx)]


def undersample(bucket: BucketCorpus, genres: Sequence[str],
                rng: np.random.Generator) -> BucketCorpus:
    """Equal-size sample per active genre, at the minimum genre's count."""
    groups = _by_genre(bucket)
    missing = [g for g in genres if not groups.get(g)]
    if missing:
        raise ValueError(
            f"bucket {bucket.bucket_start}: no songs for active "
            f"genre(s) {missing}")
    m = min(len(groups[g]) for g in genres)
    sampled: list[SongRecord] = []
    for g in sorted(genres):
        sampled.extend(_draw(groups[g], m, rng))
    return BucketCorpus(bucket_start=bucket.bucket_start,
                        bucket_width=bucket.bucket_width, records=sampled)


def popularity_quotas(available: dict[str, int],
                      shares: dict[str, float]) -> dict[str, int]:
    """Integer quotas proportional to shares.

    The scale is anchored at min(available/share), so the most-demanded
    genre uses its full count and nothing is oversampled. Fractions round
    by floor plus largest-remainder, skipping genres already at capacity.
    """
    positive = {g: s for g, s in shares.items() if s > 0}
    if not positive:
        raise ValueError("all shares are zero")
    scale = min(available[g] / s for g, s in positive.items())
    raw = {g: scale * s for g, s in positive.items()}
    quotas = {g: int(np.floor(r + 1e-9)) for g, r in raw.items()}
    target = int(round(scale))
    leftover = target - sum(quotas.values())
    order = sorted(positive, key=lambda g: (quotas[g] - raw[g], g))
    for g in order:
        if leftover <= 0:
            break
        if quotas[g] < available[g]:
            quotas[g] += 1
            leftover -= 1
    for g in shares:
        quotas.setdefault(g, 0)
    return quotas


def popularity_sample(bucket: BucketCorpus, table: PopularityTable,
                      rng: np.random.Generator,
                      genres: Optional[Sequence[str]] = None) -> BucketCorpus:
    """Sample genres proportionally to their chart share in the bucket."""
    groups = _by_genre(bucket)
    genres = tuple(genres) if genres is not None else \
        active_genres(bucket.bucket_start, sorted(groups))
    shares = table.shares_for(bucket.bucket_start)
    missing = [g for g in genres if g not in shares]
    if missing:
        raise ValueError(
            f"popularity table has no row for bucket "
            f"{bucket.bucket_start}, genre(s) {missing}")
    available = {g: len(groups.get(g, [])) for g in genres}
    quotas = popularity_quotas(available,
                               {g: shares[g] for g in genres})
    if sum(quotas.values()) == 0:
        raise ValueError(
            f"bucket {bucket.bucket_start}: popularity quotas are all zero")
    sampled: list[SongRecord] = []
    for g in sorted(genres):
        if quotas[g]:
            sampled.extend(_draw(groups[g], quotas[g], rng))
    return BucketCorpus(bucket_start=bucket.bucket_start,
                        bucket_width=bucket.bucket_width, records=sampled)


def derive_run_seeds(master_seed: int,
                     repeats: int) -> list[tuple[int, int]]:
    """Independent (sample_seed, train_seed) pairs via seed-sequence split."""
    pairs = []
    for child in np.random.SeedSequence(master_seed).spawn(repeats):
        states = child.generate_state(2, np.uint32)
        pairs.append((int(states[0]), int(states[1])))
    return pairs


@dataclass
class RepeatSummary:
    """Across-run mean and dispersion of per-bucket mean bias."""

    bucket_starts: list[int]
    mean_bias: np.ndarray
    std_bias: np.ndarray
    runs: np.ndarray          # repeats x buckets
    run_seeds: list[tuple[int, int]]

    def mean_by_bucket(self) -> dict[int, float]:
        return dict(zip(self.bucket_starts, self.mean_bias))


def repeat_average(plan: SamplePlan, buckets: Sequence[BucketCorpus],
                   analysis: Callable[[list[BucketCorpus], int], BiasSeries],
                   table: Optional[PopularityTable] = None,
                   genres: Optional[Sequence[str]] = None,
                   min_tokens: int = 0,
                   run_seeds: Optional[list[tuple[int, int]]] = None,
                   ) -> RepeatSummary:
    """Run sample -> analyse plan.repeats times and average per bucket.

    analysis receives the sampled bucket corpora and a training seed and
    must return a BiasSeries; it must be deterministic given both.
    Sampled buckets falling below min_tokens are dropped from that run.
    A failed run aborts everything, naming the run.
    """
    if plan.mode == "popularity" and table is None:
        raise ValueError("popularity mode needs a PopularityTable")
    if run_seeds is None:
        run_seeds = derive_run_seeds(plan.seed, plan.repeats)
    elif len(run_seeds) != plan.repeats:
        raise ValueError("run_seeds length must equal plan.repeats")

    corpus_genres = genres
    if corpus_genres is None:
        seen = {r.genre for b in buckets for r in b.records}
        corpus_genres = sorted(seen)

    per_run: list[dict[int, float]] = []
    for run, (sample_seed, train_seed) in enumerate(run_seeds):
        try:
            rng = np.random.default_rng(sample_seed)
            sampled = []
            for bucket in buckets:
                act = active_genres(bucket.bucket_start, corpus_genres)
                if plan.mode == "undersample":
                    s = undersample(bucket, act, rng)
                else:
                    s = popularity_sample(bucket, table, rng, act)
                if s.token_count >= min_tokens:
                    sampled.append(s)
            series = analysis(sampled, train_seed)
            per_run.append(series.mean_bias())
        except Exception as exc:
            raise RuntimeError(f"run {run} failed: {exc}") from exc

    starts = sorted({b for row in per_run for b in row})
    matrix = np.full((len(per_run), len(starts)), np.nan)
    for i, row in enumerate(per_run):
        for j, b in enumerate(starts):
            if b in row:
                matrix[i, j] = row[b]
    mean = np.nanmean(matrix, axis=0)
    std = np.nanstd(matrix, axis=0, ddof=1) if len(per_run) > 1 else \
        np.zeros(len(starts))
    return RepeatSummary(bucket_starts=starts, mean_bias=mean, std_bias=std,
                         runs=matrix, run_seeds=list(run_seeds))


def write_run_log_csv(summary: RepeatSummary, path: str | Path,
                      header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["run", "bucket_start", "mean_bias"])
        for i in range(summary.runs.shape[0]):
            for j, b in enumerate(summary.bucket_starts):
                value = summary.runs[i, j]
                if not np.isnan(value):
                    w.writerow([i, b, f"{value:.10g}"])
