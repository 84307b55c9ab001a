"""Group vectors, per-word bias scores, and bias time series.

The bias of a trait word in one bucket is cosine(word, male group vector)
minus cosine(word, female group vector); positive means more associated
with the male side. The per-bucket mean over trait words is the series
value tracked over time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Optional

import numpy as np

from .embedding import EmbeddingModel, cosine

BUNDLED_LEXICONS = ("male", "female", "competence", "warmth", "intelligence",
                    "masculine_stereotypes", "feminine_stereotypes",
                    "aggressive_verbs")


@dataclass(frozen=True)
class Lexicon:
    """A named, ordered word list. Lowercase, nonempty, duplicate-free."""

    name: str
    words: tuple[str, ...]

    def __post_init__(self):
        if not self.words:
            raise ValueError(f"lexicon {self.name!r} is empty")
        if any(w != w.lower() for w in self.words):
            raise ValueError(f"lexicon {self.name!r} has uppercase entries")
        if len(set(self.words)) != len(self.words):
            raise ValueError(f"lexicon {self.name!r} has duplicate entries")

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self):
        return iter(self.words)


def load_lexicon(path: str | Path, name: str | None = None) -> Lexicon:
    """Read a lexicon file: one word per line, '#' starts a comment."""
    path = Path(path)
    words: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.split("#", 1)[0].strip()
            if word:
                words.append(word)
    return Lexicon(name=name or path.stem, words=tuple(words))


def bundled_lexicon(name: str) -> Lexicon:
    """Load one of the lexicons shipped with the package."""
    if name not in BUNDLED_LEXICONS:
        raise KeyError(f"no bundled lexicon {name!r}; "
                       f"choose from {BUNDLED_LEXICONS}")
    text = resources.files("biascorpus.data").joinpath(
        f"{name}.txt").read_text(encoding="utf-8")
    words = tuple(line.split("#", 1)[0].strip() for line in text.splitlines()
                  if line.split("#", 1)[0].strip())
    return Lexicon(name=name, words=words)


@dataclass
class GroupVector:
    group: str
    vector: np.ndarray
    words_found: list[str]
    words_missing: list[str]


@dataclass(frozen=True)
class BiasObservation:
    bucket_start: int
    trait_word: str
    bias: float
    cos_male: float
    cos_female: float


@dataclass(frozen=True)
class BucketAggregate:
    bucket_start: int
    mean_bias: float
    n_words: int
    normalizer: Optional[float] = None
    flag: Optional[str] = None


@dataclass
class BiasSeries:
    trait: str
    observations: list[BiasObservation]
    aggregates: list[BucketAggregate] = field(default_factory=list)

    def buckets(self) -> list[int]:
        return [a.bucket_start for a in self.aggregates]

    def mean_bias(self) -> dict[int, float]:
        return {a.bucket_start: a.mean_bias for a in self.aggregates}

    def values(self) -> np.ndarray:
        return np.array([a.mean_bias for a in self.aggregates])


def group_vector(model: EmbeddingModel, lexicon: Lexicon, group: str = "",
                 normalize_words: bool = False) -> GroupVector:
    """Mean input vector over the lexicon words present in the vocabulary.

    Vectors are averaged raw; normalize_words switches to averaging
    unit-normalized word vectors (sensitivity variant). Missing words are
    skipped and reported, never imputed.
    """
    found, missing, rows = [], [], []
    for w in lexicon:
        if w in model:
            found.append(w)
            v = model.vector(w)
            if normalize_words:
                norm = np.linalg.norm(v)
                if norm == 0.0:
                    raise ValueError(f"zero-norm vector for {w!r}")
                v = v / norm
            rows.append(v)
        else:
            missing.append(w)
    if not found:
        raise ValueError(
            f"no word of lexicon {lexicon.name!r} is in the vocabulary")
    return GroupVector(group=group or lexicon.name,
                       vector=np.mean(rows, axis=0),
                       words_found=found, words_missing=missing)


def trait_bias(model: EmbeddingModel, trait_lexicon: Lexicon,
               male_vec: GroupVector, female_vec: GroupVector,
               bucket_start: int = 0) -> list[BiasObservation]:
    """Score each trait word found in the vocabulary; missing ones skip."""
    observations = []
    for w in trait_lexicon:
        if w not in model:
            continue
        cm = cosine(model.vector(w), male_vec.vector)
        cf = cosine(model.vector(w), female_vec.vector)
        observations.append(BiasObservation(
            bucket_start=bucket_start, trait_word=w, bias=cm - cf,
            cos_male=cm, cos_female=cf))
    if not observations:
        raise ValueError(
            f"no word of trait lexicon {trait_lexicon.name!r} "
            "is in the vocabulary")
    return observations


def _aggregate(observations: list[BiasObservation],
               trait: str) -> BiasSeries:
    by_bucket: dict[int, list[float]] = {}
    for obs in observations:
        by_bucket.setdefault(obs.bucket_start, []).append(obs.bias)
    aggregates = [
        BucketAggregate(bucket_start=b, mean_bias=float(np.mean(vals)),
                        n_words=len(vals))
        for b, vals in sorted(by_bucket.items())]
    return BiasSeries(trait=trait, observations=observations,
                      aggregates=aggregates)


def bias_series(models: dict[int, EmbeddingModel], male_lex: Lexicon,
                female_lex: Lexicon, trait_lex: Lexicon,
                filter: str = "none",
                normalize_words: bool = False) -> BiasSeries:
    """Score a trait lexicon across per-bucket models.

    models maps bucket_start -> trained model (at least two buckets).
    filter="every_period" restricts trait words to those present in every
    bucket's vocabulary; filter="min_count5" drops, per bucket, trait
    words with corpus frequency below 5 there (a pass-through when the
    models were already trained with min_count >= 5).
    """
    if len(models) < 2:
        raise ValueError("bias_series needs at least 2 buckets")
    if filter not in ("none", "min_count5", "every_period"):
        raise ValueError(f"unknown filter {filter!r}")

    allowed_per_bucket: dict[int, set[str]] = {}
    if filter == "every_period":
        common = set(trait_lex.words)
        for model in models.values():
            common &= {w for w in trait_lex if w in model}
        if not common:
            raise ValueError(
                "every_period filter leaves no trait word present in all "
                "buckets")
        allowed_per_bucket = {b: common for b in models}
    elif filter == "min_count5":
        for b, model in models.items():
            vocab = model.vocab
            allowed_per_bucket[b] = {
                w for w in trait_lex
                if w in vocab and int(vocab.counts[vocab.index[w]]) >= 5}
    else:
        allowed_per_bucket = {b: set(trait_lex.words) for b in models}

    observations: list[BiasObservation] = []
    for b in sorted(models):
        model = models[b]
        mv = group_vector(model, male_lex, "male", normalize_words)
        fv = group_vector(model, female_lex, "female", normalize_words)
        for obs in trait_bias(model, trait_lex, mv, fv, bucket_start=b):
            if obs.trait_word in allowed_per_bucket[b]:
                observations.append(obs)
    if not observations:
        raise ValueError("no trait word survived scoring")
    return _aggregate(observations, trait_lex.name)


def bias_map(model: EmbeddingModel, male_lex: Lexicon, female_lex: Lexicon,
             words) -> dict[str, float]:
    """Per-word bias scores for an arbitrary word list on one model."""
    mv = group_vector(model, male_lex, "male")
    fv = group_vector(model, female_lex, "female")
    scores = {}
    for w in words:
        if w in model:
            v = model.vector(w)
            scores[w] = cosine(v, mv.vector) - cosine(v, fv.vector)
    return scores


def mean_pairwise_similarity(model: EmbeddingModel,
                             lexicon: Lexicon) -> Optional[float]:
    """Mean cosine over all pairs of lexicon words found; None if < 2."""
    found = [w for w in lexicon if w in model]
    if len(found) < 2:
        return None
    sims = [cosine(model.vector(a), model.vector(b))
            for a, b in combinations(found, 2)]
    return float(np.mean(sims))


def complexity_normalize(series: BiasSeries,
                         models: dict[int, EmbeddingModel],
                         male_lex: Lexicon, female_lex: Lexicon) -> BiasSeries:
    """Divide each bucket mean by the within-gender similarity average.

    The normalizer for a bucket is the mean of (a) the mean pairwise
    cosine among male-lexicon words found and (b) the same for the female
    lexicon; it controls for overall vocabulary dispersion drifting over
    time. A group with fewer than two found words contributes nothing
    (flagged); a non-positive normalizer leaves the raw value, flagged.
    """
    aggregates = []
    for agg in series.aggregates:
        model = models[agg.bucket_start]
        sim_m = mean_pairwise_similarity(model, male_lex)
        sim_f = mean_pairwise_similarity(model, female_lex)
        parts = [s for s in (sim_m, sim_f) if s is not None]
        if not parts:
            aggregates.append(replace(agg, flag="not_normalizable"))
            continue
        flag = None if len(parts) == 2 else "single_word_group"
        normalizer = float(np.mean(parts))
        if normalizer <= 0:
            aggregates.append(replace(agg, normalizer=normalizer,
                                      flag="non_positive_normalizer"))
            continue
        aggregates.append(replace(agg, mean_bias=agg.mean_bias / normalizer,
                                  normalizer=normalizer, flag=flag))
    return BiasSeries(trait=series.trait, observations=series.observations,
                      aggregates=aggregates)


def bootstrap_ci(values: np.ndarray, n_boot: int = 1000, seed: int = 0,
                 level: float = 0.95) -> tuple[float, float]:
    """Percentile bootstrap CI for the mean, resampling over trait words."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot bootstrap an empty sample")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, values.size, size=(n_boot, values.size))
    means = values[idx].mean(axis=1)
    lo = (1 - level) / 2
    return (float(np.quantile(means, lo)),
            float(np.quantile(means, 1 - lo)))


def write_series_csv(series: BiasSeries, path: str | Path,
                     header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["bucket_start", "trait_word", "cos_male", "cos_female",
                    "bias"])
        for obs in series.observations:
            w.writerow([obs.bucket_start, obs.trait_word,
                        f"{obs.cos_male:.10g}", f"{obs.cos_female:.10g}",
                        f"{obs.bias:.10g}"])


def write_aggregate_csv(series: BiasSeries, path: str | Path,
                        n_boot: int = 1000, seed: int = 0,
                        header_comment: str | None = None) -> None:
    by_bucket: dict[int, list[float]] = {}
    for obs in series.observations:
        by_bucket.setdefault(obs.bucket_start, []).append(obs.bias)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["bucket_start", "mean_bias", "n_words", "ci_low",
                    "ci_high"])
        for agg in series.aggregates:
            vals = np.asarray(by_bucket.get(agg.bucket_start, []))
            if agg.normalizer and agg.flag != "non_positive_normalizer":
                vals = vals / agg.normalizer
            if vals.size:
                lo, hi = bootstrap_ci(vals, n_boot=n_boot,
                                      seed=seed + agg.bucket_start)
            else:
                lo = hi = agg.mean_bias
            w.writerow([agg.bucket_start, f"{agg.mean_bias:.10g}",
                        agg.n_words, f"{lo:.10g}", f"{hi:.10g}"])
