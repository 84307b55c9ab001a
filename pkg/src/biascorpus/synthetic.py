"""Synthetic corpora with a planted gender-trait association.

Documents are built from sentences of three kinds: trait sentences mix
gender words, trait words and filler in one neighborhood, with the gender
slots favoring the male lexicon at a configurable odds ratio; gender
sentences use both lexicons evenly with no trait words; the rest is pure
filler. Trait and gender words therefore share contexts inside trait
sentences, which is what moves their input vectors together, and the
male side gets more of that exposure when the ratio exceeds 1. Ratio 1
is the null corpus. Used by tests, demos, and the bundled pipeline
example.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .bias import bundled_lexicon

FEMALE_NAMES = ("mary", "linda", "susan", "karen", "lisa", "donna",
                "sandra", "carol", "ruth", "sharon")
MALE_NAMES = ("james", "robert", "john", "michael", "david", "william",
              "richard", "thomas", "charles", "joseph")

_FILLER = None


def _filler_words(n: int = 180) -> list[str]:
    # pseudo-words keep the filler vocabulary disjoint from the lexicons
    global _FILLER
    if _FILLER is None or len(_FILLER) != n:
        syllables = ["ba", "do", "ki", "lu", "mo", "na", "pe", "ri", "so",
                     "tu", "va", "ze"]
        words = []
        i = 0
        while len(words) < n:
            a = syllables[i % len(syllables)]
            b = syllables[(i // len(syllables)) % len(syllables)]
            c = syllables[(i // len(syllables) ** 2) % len(syllables)]
            words.append(a + b + c)
            i += 1
        _FILLER = words
    return _FILLER


def biased_docs(seed: int, n_tokens: int = 200_000, ratio: float = 3.0,
                swap_genders: bool = False, doc_len: int = 120,
                sentence_len: int = 10, trait_rate: float = 0.25,
                gender_rate: float = 0.25,
                male_words=None, female_words=None, trait_words=None,
                ) -> list[list[str]]:
    """Token documents where trait words side with one gender lexicon.

    ratio is the male:female odds of every gender slot inside a trait
    sentence; swap_genders hands the advantage to the female lexicon
    instead. Roughly n_tokens tokens come back, split into doc_len-token
    documents.
    """
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    rng = np.random.default_rng(seed)
    male = list(male_words or bundled_lexicon("male").words)
    female = list(female_words or bundled_lexicon("female").words)
    traits = list(trait_words or bundled_lexicon("competence").words)
    filler = _filler_words()
    if swap_genders:
        male, female = female, male
    p_male = ratio / (ratio + 1.0)

    def gender_pick(p):
        side = male if rng.random() < p else female
        return side[rng.integers(len(side))]

    docs: list[list[str]] = []
    doc: list[str] = []
    produced = 0
    while produced < n_tokens:
        kind = rng.random()
        sentence = []
        for _ in range(sentence_len):
            slot = rng.random()
            if kind < trait_rate:
                # trait sentence: gender and trait words share the window
                if slot < 0.35:
                    sentence.append(gender_pick(p_male))
                elif slot < 0.65:
                    sentence.append(traits[rng.integers(len(traits))])
                else:
                    sentence.append(filler[rng.integers(len(filler))])
            elif kind < trait_rate + gender_rate:
                if slot < 0.35:
                    sentence.append(gender_pick(0.5))
                else:
                    sentence.append(filler[rng.integers(len(filler))])
            else:
                sentence.append(filler[rng.integers(len(filler))])
        doc.extend(sentence)
        produced += len(sentence)
        if len(doc) >= doc_len:
            docs.append(doc)
            doc = []
    if doc:
        docs.append(doc)
    return docs


def _artist_pool(rng: np.random.Generator,
                 n_solo: int = 60, n_bands: int = 15):
    """Solo acts with gendered first names plus bands with mixed rosters."""
    surnames = ("stone", "rivers", "fields", "knight", "marsh", "wilde",
                "frost", "vale", "cross", "lane")
    artists = []   # (display name, resolution members or None)
    for i in range(n_solo):
        female = i % 2 == 0
        first = (FEMALE_NAMES if female else MALE_NAMES)[i % 10]
        last = surnames[(i // 2) % len(surnames)]
        artists.append((f"{first.title()} {last.title()}", None))
    for i in range(n_bands):
        size = 2 + (i % 3)
        members = []
        for k in range(size):
            pool = FEMALE_NAMES if (i + k) % 2 == 0 else MALE_NAMES
            members.append(pool[(i * 3 + k) % 10])
        artists.append((f"The {surnames[i % len(surnames)].title()} "
                        f"Band {i}", members))
    rng.shuffle(artists)
    return artists


def synthetic_song_corpus(seed: int = 0, n_songs: int = 2000,
                          year_start: int = 1965, year_end: int = 2018,
                          tokens_per_song: int = 150,
                          start_ratio: float = 3.0,
                          end_ratio: float = 1.5) -> dict:
    """A small end-to-end corpus: songs, name table, artist resolution.

    The planted male:female trait ratio declines linearly from start_ratio
    to end_ratio over the year span, so the bias series trends downward.
    Genres cycle through the six classes, with dance held out before 1980
    and rap before 1990.

    Returns a dict with keys songs (JSONL-ready dicts), name_table rows
    (name, gender, count) and artist_resolution rows (artist, members).
    """
    rng = np.random.default_rng(seed)
    artists = _artist_pool(rng)
    genres = ("pop", "rock", "country", "rnb", "dance", "rap")
    span = max(year_end - year_start, 1)

    songs = []
    for i in range(n_songs):
        year = int(year_start + rng.integers(0, span + 1))
        eligible = [g for g in genres
                    if not (g == "dance" and year < 1980)
                    and not (g == "rap" and year < 1990)]
        genre = eligible[int(rng.integers(len(eligible)))]
        ratio = start_ratio + (end_ratio - start_ratio) \
            * (year - year_start) / span
        docs = biased_docs(int(rng.integers(2 ** 31)),
                           n_tokens=tokens_per_song, ratio=ratio,
                           doc_len=tokens_per_song + 2)
        tokens = [t for doc in docs for t in doc][:tokens_per_song]
        artist, _ = artists[int(rng.integers(len(artists)))]
        songs.append({
            "id": f"s{i:05d}", "artist": artist,
            "title": f"Track {i}", "year": year, "genre": genre,
            "lyrics": " ".join(tokens)})

    name_table = [(n, "F", 5000) for n in FEMALE_NAMES]
    name_table += [(n, "M", 5000) for n in MALE_NAMES]
    # a pinch of cross-gender counts so margins matter
    name_table += [(FEMALE_NAMES[0], "M", 50), (MALE_NAMES[0], "F", 50)]

    resolution = [(name, members) for name, members in artists
                  if members is not None]
    return {"songs": songs, "name_table": name_table,
            "artist_resolution": resolution}


def write_jsonl(rows, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True))
            fh.write("\n")
