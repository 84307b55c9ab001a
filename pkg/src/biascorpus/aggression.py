"""Gendered objects of aggressive verbs in dependency-parsed text.

Input is CoNLL-U from any external parser. A token counts as a gendered
recipient when it stands in an object relation (obj/iobj/obl by default)
under a VERB head and its surface form or lemma is in a gender lexicon;
the event is aggressive when the head's lemma is in the aggressive-verb
lexicon. Possessive determiners (UPOS DET) never count.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

from scipy import stats

from .bias import Lexicon
from .trends import TrendFit, fit_ols

OBJECT_RELATIONS = frozenset({"obj", "iobj", "obl"})

UD_RELATIONS = frozenset({
    "acl", "advcl", "advmod", "amod", "appos", "aux", "case", "cc", "ccomp",
    "clf", "compound", "conj", "cop", "csubj", "dep", "det", "discourse",
    "dislocated", "expl", "fixed", "flat", "goeswith", "iobj", "list",
    "mark", "nmod", "nsubj", "nummod", "obj", "obl", "orphan", "parataxis",
    "punct", "reparandum", "root", "vocative", "xcomp"})


class MalformedSentence(ValueError):
    pass


@dataclass(frozen=True)
class ParseToken:
    form: str      # surface, lowercased
    lemma: str
    upos: str
    head: int      # 1-based index of the head token, 0 for the root
    deprel: str

    @property
    def relation(self) -> str:
        # base relation without the subtype ("obl:agent" -> "obl")
        return self.deprel.split(":", 1)[0]


@dataclass
class ParsedSentence:
    """One dependency tree; construction validates the tree shape."""

    tokens: list[ParseToken]

    def __post_init__(self):
        n = len(self.tokens)
        if n == 0:
            raise MalformedSentence("empty sentence")
        roots = 0
        for tok in self.tokens:
            if not 0 <= tok.head <= n:
                raise MalformedSentence(f"head {tok.head} out of range")
            if tok.relation not in UD_RELATIONS:
                raise MalformedSentence(f"unknown relation {tok.deprel!r}")
            if tok.head == 0:
                roots += 1
        if roots != 1:
            raise MalformedSentence(f"{roots} roots, expected exactly 1")
        # every token must reach the root without cycles
        for start in range(n):
            seen = set()
            node = start + 1
            while node != 0:
                if node in seen:
                    raise MalformedSentence("cycle in head chain")
                seen.add(node)
                node = self.tokens[node - 1].head

    def head_of(self, token: ParseToken) -> Optional[ParseToken]:
        return None if token.head == 0 else self.tokens[token.head - 1]


def _sentence_from_rows(rows: list[list[str]]) -> ParsedSentence:
    tokens = []
    for cols in rows:
        if len(cols) != 10:
            raise MalformedSentence(f"{len(cols)} columns, expected 10")
        tok_id, form, lemma, upos, _, _, head, deprel = cols[:8]
        if "-" in tok_id or "." in tok_id:
            continue  # multiword-token ranges and empty nodes carry no tree
        try:
            int(tok_id)
            head_ix = int(head)
        except ValueError as exc:
            raise MalformedSentence(f"non-integer id/head: {exc}") from exc
        tokens.append(ParseToken(form=form.lower(), lemma=lemma.lower(),
                                 upos=upos, head=head_ix, deprel=deprel))
    return ParsedSentence(tokens=tokens)


def read_conllu(source: str | Path | Iterable[str],
                diagnostics: Optional[list[tuple[int, str]]] = None,
                ) -> Iterator[ParsedSentence]:
    """Yield validated sentences from a CoNLL-U file or line iterable.

    Malformed sentences are skipped; when a diagnostics list is passed,
    each skip appends (sentence_number, reason).
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            yield from read_conllu(fh, diagnostics)
        return

    sentence_no = 0
    rows: list[list[str]] = []
    for line in source:
        line = line.rstrip("\n")
        if line.startswith("#"):
            continue
        if not line.strip():
            if rows:
                sentence_no += 1
                try:
                    yield _sentence_from_rows(rows)
                except MalformedSentence as exc:
                    if diagnostics is not None:
                        diagnostics.append((sentence_no, str(exc)))
                rows = []
            continue
        rows.append(line.split("\t"))
    if rows:
        sentence_no += 1
        try:
            yield _sentence_from_rows(rows)
        except MalformedSentence as exc:
            if diagnostics is not None:
                diagnostics.append((sentence_no, str(exc)))


@dataclass
class AggressionCounts:
    """Recipient tallies for one bucket."""

    female_object_agg: int = 0
    male_object_agg: int = 0
    female_object_any: int = 0
    male_object_any: int = 0

    def merged(self, other: "AggressionCounts") -> "AggressionCounts":
        return AggressionCounts(
            self.female_object_agg + other.female_object_agg,
            self.male_object_agg + other.male_object_agg,
            self.female_object_any + other.female_object_any,
            self.male_object_any + other.male_object_any)


def count_recipients(sentences: Iterable[ParsedSentence],
                     agg_verbs: Lexicon, male_lex: Lexicon,
                     female_lex: Lexicon,
                     object_relations: frozenset = OBJECT_RELATIONS,
                     ) -> AggressionCounts:
    """Fold gendered-object events over a sentence stream."""
    male = set(male_lex.words)
    female = set(female_lex.words)
    aggressive = set(agg_verbs.words)
    counts = AggressionCounts()
    for sentence in sentences:
        for tok in sentence.tokens:
            if tok.relation not in object_relations or tok.upos == "DET":
                continue
            head = sentence.head_of(tok)
            if head is None or head.upos != "VERB":
                continue
            is_agg = head.lemma in aggressive
            if tok.form in female or tok.lemma in female:
                counts.female_object_any += 1
                if is_agg:
                    counts.female_object_agg += 1
            if tok.form in male or tok.lemma in male:
                counts.male_object_any += 1
                if is_agg:
                    counts.male_object_agg += 1
    return counts


def count_file(path: str | Path, agg_verbs: Lexicon, male_lex: Lexicon,
               female_lex: Lexicon,
               object_relations: frozenset = OBJECT_RELATIONS,
               ) -> tuple[AggressionCounts, list[tuple[int, str]]]:
    """Count one CoNLL-U file; returns (counts, skipped-sentence report)."""
    diagnostics: list[tuple[int, str]] = []
    counts = count_recipients(read_conllu(path, diagnostics), agg_verbs,
                              male_lex, female_lex, object_relations)
    return counts, diagnostics


def chi_square_share(count_a: int, count_b: int) -> tuple[float, float]:
    """One-df goodness of fit of two counts against a 50/50 split."""
    if count_a < 0 or count_b < 0:
        raise ValueError("counts must be nonnegative")
    total = count_a + count_b
    if total == 0:
        raise ValueError("no events to test")
    expected = total / 2.0
    chi2 = ((count_a - expected) ** 2 + (count_b - expected) ** 2) / expected
    return float(chi2), float(stats.chi2.sf(chi2, df=1))


def ratio_trend(counts_by_bucket: dict[int, AggressionCounts],
                controlled: bool = False,
                ) -> tuple[TrendFit, list[int]]:
    """Regress the gender balance of aggression on time via OLS.

    Uncontrolled: the female share of aggressive-object events.
    Controlled: (female_agg/female_any) - (male_agg/male_any), which
    nets out how often each gender receives any action. Buckets with a
    zero denominator are excluded and returned alongside the fit.
    """
    start = min(counts_by_bucket)
    points = []
    excluded = []
    for b in sorted(counts_by_bucket):
        c = counts_by_bucket[b]
        if controlled:
            if c.female_object_any == 0 or c.male_object_any == 0:
                excluded.append(b)
                continue
            y = (c.female_object_agg / c.female_object_any
                 - c.male_object_agg / c.male_object_any)
        else:
            total = c.female_object_agg + c.male_object_agg
            if total == 0:
                excluded.append(b)
                continue
            y = c.female_object_agg / total
        points.append((float(b - start), y))
    if len(points) < 3:
        raise ValueError(
            f"only {len(points)} usable buckets after exclusions; need 3")
    return fit_ols(points), excluded


def recipient_trend(counts_by_bucket: dict[int, AggressionCounts],
                    gender: str,
                    token_counts: Optional[dict[int, int]] = None,
                    ) -> TrendFit:
    """OLS trend of aggressive-recipient counts for one gender.

    token_counts switches the outcome to events per million corpus
    tokens, controlling for corpus growth over time.
    """
    if gender not in ("female", "male"):
        raise ValueError("gender must be 'female' or 'male'")
    start = min(counts_by_bucket)
    points = []
    for b in sorted(counts_by_bucket):
        c = counts_by_bucket[b]
        value = float(c.female_object_agg if gender == "female"
                      else c.male_object_agg)
        if token_counts is not None:
            value = 1e6 * value / token_counts[b]
        points.append((float(b - start), value))
    return fit_ols(points)


def write_counts_csv(counts_by_bucket: dict[int, AggressionCounts],
                     path: str | Path,
                     header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["bucket_start", "female_object_agg", "male_object_agg",
                    "female_object_any", "male_object_any"])
        for b in sorted(counts_by_bucket):
            c = counts_by_bucket[b]
            w.writerow([b, c.female_object_agg, c.male_object_agg,
                        c.female_object_any, c.male_object_any])
