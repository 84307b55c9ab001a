"""Corpus ingestion: cleaning, dedup, tokenization, and time-bucket assembly."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

GENRES = ("pop", "rock", "country", "rnb", "dance", "rap")

# Sparse genre labels are merged into their larger sibling; remaining aliases
# only normalize spelling.
GENRE_ALIASES = {
    "hip-hop": "rap",
    "hip hop": "rap",
    "hiphop": "rap",
    "electronic": "dance",
    "r&b": "rnb",
    "r&b": "rnb",
}


@dataclass(frozen=True)
class SongRecord:
    """One cleaned document: metadata plus its lowercase token stream."""

    id: str
    artist: str
    title: str
    year: int
    genre: str
    tokens: tuple[str, ...]
    artist_gender_score: Optional[float] = None

    @property
    def token_count(self) -> int:
        return len(self.tokens)

    def with_gender_score(self, score: Optional[float]) -> "SongRecord":
        return replace(self, artist_gender_score=score)


@dataclass
class BucketCorpus:
    """All records assigned to one [bucket_start, bucket_start + width) span."""

    bucket_start: int
    bucket_width: int
    records: list[SongRecord] = field(default_factory=list)

    @property
    def token_count(self) -> int:
        return sum(r.token_count for r in self.records)

    def tokens(self) -> Iterable[tuple[str, ...]]:
        for r in self.records:
            yield r.tokens


@dataclass
class CorpusConfig:
    """Knobs for ingestion and bucketing.

    year_start/year_end bound the accepted calendar years (inclusive) and
    anchor bucket alignment. The language filter is a stoplist heuristic:
    a record passes when at least english_threshold of its tokens are
    English function words.
    """

    year_start: int = 1965
    year_end: int = 2018
    bucket_width: int = 5
    min_bucket_tokens: int = 500_000
    english_filter: bool = True
    english_threshold: float = 0.15


def default_function_words() -> frozenset[str]:
    """Bundled 200-word English function-word stoplist."""
    text = resources.files("biascorpus.data").joinpath(
        "english_function_words.txt").read_text(encoding="utf-8")
    return frozenset(
        line.strip() for line in text.splitlines()
        if line.strip() and not line.startswith("#"))


def _remove_bracketed(line: str) -> str:
    # Drop every [...] span; nesting tracked by depth, an unclosed "[" eats
    # the rest of the line, a stray "]" is left for edge stripping.
    out = []
    depth = 0
    for ch in line:
        if ch == "[":
            depth += 1
        elif ch == "]" and depth > 0:
            depth -= 1
        elif depth == 0:
            out.append(ch)
    return "".join(out)


def _strip_edges(token: str) -> str:
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def clean(raw_lyrics: str) -> list[str]:
    """Clean raw lyric text into lowercase tokens.

    Bracketed annotations are removed, text is lowercased and split on
    whitespace, and leading/trailing non-alphanumerics are stripped from
    each token (internal apostrophes and hyphens survive, so "ain't"
    stays one token).
    """
    tokens: list[str] = []
    for line in raw_lyrics.split("\n"):
        for tok in _remove_bracketed(line).lower().split():
            tok = _strip_edges(tok)
            if tok:
                tokens.append(tok)
    return tokens


def english_filter(tokens: list[str], stoplist: frozenset[str] | set[str],
                   threshold: float) -> bool:
    """True when the share of function-word tokens reaches threshold."""
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if not tokens:
        return False
    hits = sum(1 for t in tokens if t in stoplist)
    return hits / len(tokens) >= threshold


def normalize_key(text: str) -> str:
    """Dedup normalization: casefold and collapse whitespace."""
    return " ".join(text.casefold().split())


def canonical_genre(label: str) -> Optional[str]:
    g = label.strip().lower()
    g = GENRE_ALIASES.get(g, g)
    return g if g in GENRES else None


def ingest(path: str | Path, config: CorpusConfig | None = None,
           stoplist: frozenset[str] | None = None,
           ) -> tuple[list[SongRecord], list[tuple[int, str]]]:
    """Read a JSONL corpus file into cleaned, deduplicated records.

    Each line must be an object with id, artist, title, year, genre and
    lyrics fields. Lines that fail to parse or lack required information
    are dropped and reported, never fatal. Duplicate (artist, title)
    pairs keep the earliest year, ties broken by smaller id, so the
    surviving set does not depend on input order.

    Returns:
        (records, rejects) where rejects is a list of (line_no, reason)
        rows for the rejects report.

    Raises:
        ValueError: if no valid record survives.
    """
    config = config or CorpusConfig()
    if stoplist is None and config.english_filter:
        stoplist = default_function_words()

    rejects: list[tuple[int, str]] = []
    # dedup key -> (record, line_no)
    kept: dict[tuple[str, str], tuple[SongRecord, int]] = {}

    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                rejects.append((line_no, "malformed_json"))
                continue
            if not isinstance(obj, dict):
                rejects.append((line_no, "malformed_json"))
                continue

            reason = None
            for fld in ("id", "artist", "title", "year", "genre", "lyrics"):
                if obj.get(fld) in (None, ""):
                    reason = f"missing_{fld}"
                    break
            if reason:
                rejects.append((line_no, reason))
                continue

            try:
                year = int(obj["year"])
            except (TypeError, ValueError):
                rejects.append((line_no, "bad_year"))
                continue
            if not config.year_start <= year <= config.year_end:
                rejects.append((line_no, "year_out_of_range"))
                continue

            genre = canonical_genre(str(obj["genre"]))
            if genre is None:
                rejects.append((line_no, "unknown_genre"))
                continue

            tokens = clean(str(obj["lyrics"]))
            if not tokens:
                rejects.append((line_no, "empty_lyrics"))
                continue
            if config.english_filter and not english_filter(
                    tokens, stoplist, config.english_threshold):
                rejects.append((line_no, "non_english"))
                continue

            record = SongRecord(
                id=str(obj["id"]), artist=str(obj["artist"]),
                title=str(obj["title"]), year=year, genre=genre,
                tokens=tuple(tokens))
            key = (normalize_key(record.artist), normalize_key(record.title))
            if key in kept:
                old, old_line = kept[key]
                if (record.year, record.id) < (old.year, old.id):
                    kept[key] = (record, line_no)
                    rejects.append((old_line, "duplicate"))
                else:
                    rejects.append((line_no, "duplicate"))
            else:
                kept[key] = (record, line_no)

    records = [rec for rec, _ in kept.values()]
    if not records:
        raise ValueError(f"no valid records in {path}")
    records.sort(key=lambda r: (r.year, r.id))
    return records, rejects


def bucketize(records: list[SongRecord], bucket_width: int = 5,
              min_tokens: int = 500_000, start_year: int = 1965,
              ) -> tuple[list[BucketCorpus], list[tuple[int, int, bool]]]:
    """Partition records into aligned time buckets.

    Buckets start at start_year and advance by bucket_width. Buckets whose
    token count falls below min_tokens are excluded from the returned list
    but still appear in the report rows (bucket_start, token_count,
    included). The threshold is inclusive: exactly min_tokens is kept.
    """
    if bucket_width < 1:
        raise ValueError("bucket_width must be >= 1")
    by_start: dict[int, BucketCorpus] = {}
    for rec in records:
        b = start_year + ((rec.year - start_year) // bucket_width) * bucket_width
        if b not in by_start:
            by_start[b] = BucketCorpus(bucket_start=b, bucket_width=bucket_width)
        by_start[b].records.append(rec)

    report = []
    kept = []
    for b in sorted(by_start):
        bucket = by_start[b]
        ok = bucket.token_count >= min_tokens
        report.append((b, bucket.token_count, ok))
        if ok:
            kept.append(bucket)
    return kept, report


def write_rejects_csv(rejects: list[tuple[int, str]], path: str | Path,
                      header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["line_no", "reason"])
        w.writerows(rejects)


def write_bucket_report_csv(report: list[tuple[int, int, bool]],
                            path: str | Path,
                            header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["bucket_start", "token_count", "included"])
        for b, n, ok in report:
            w.writerow([b, n, int(ok)])
