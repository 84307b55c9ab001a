import numpy as np
import pytest

from biascorpus.bias import bias_series, bundled_lexicon
from biascorpus.corpus import BucketCorpus, SongRecord
from biascorpus.embedding import TrainConfig, train
from biascorpus.resampling import (PopularityTable, SamplePlan,
                                   active_genres, derive_run_seeds,
                                   load_popularity_table,
                                   popularity_quotas, popularity_sample,
                                   repeat_average, undersample,
                                   write_run_log_csv)
from biascorpus.synthetic import biased_docs


def records_for(genre, n, bucket_start, tokens=("x",) * 10):
    return [SongRecord(id=f"{genre}{bucket_start}-{i}", artist=f"a{i}",
                       title=f"t{i}", year=bucket_start, genre=genre,
                       tokens=tuple(tokens)) for i in range(n)]


def bucket_with(counts: dict, bucket_start=1995):
    records = []
    for genre, n in counts.items():
        records.extend(records_for(genre, n, bucket_start))
    return BucketCorpus(bucket_start=bucket_start, bucket_width=5,
                        records=records)


# ---------------------------------------------------------------------------
# activation and plans
# ---------------------------------------------------------------------------


def test_active_genres_by_year():
    genres = ("pop", "rock", "country", "rnb", "dance", "rap")
    assert active_genres(1975, genres) == ("pop", "rock", "country", "rnb")
    assert active_genres(1980, genres) == ("pop", "rock", "country", "rnb",
                                           "dance")
    assert active_genres(1990, genres) == genres


def test_sample_plan_validation():
    with pytest.raises(ValueError):
        SamplePlan(mode="bogus")
    with pytest.raises(ValueError):
        SamplePlan(mode="undersample", repeats=0)
    with pytest.raises(ValueError):
        SamplePlan(mode="undersample",
                   quotas={1990: {"pop": 5, "rock": 7}})
    with pytest.raises(ValueError):
        SamplePlan(mode="popularity", quotas={1990: {"pop": -1}})
    SamplePlan(mode="popularity", quotas={1990: {"pop": 5, "rock": 7}})


def test_popularity_table_validation():
    with pytest.raises(ValueError):
        PopularityTable(rows=[(1990, "pop", 0.6), (1990, "rock", 0.2)])
    table = PopularityTable(rows=[(1990, "pop", 0.6), (1990, "rock", 0.4)])
    assert table.shares_for(1990) == {"pop": 0.6, "rock": 0.4}


def test_load_popularity_table(tmp_path):
    p = tmp_path / "pop.csv"
    p.write_text("bucket_start,genre,share\n2000,pop,0.5\n2000,rock,0.25\n"
                 "2000,country,0.25\n")
    table = load_popularity_table(p)
    assert table.shares_for(2000)["pop"] == 0.5


# ---------------------------------------------------------------------------
# undersample
# ---------------------------------------------------------------------------


def test_undersample_equalizes_to_min_genre():
    bucket = bucket_with({"pop": 1000, "rock": 800, "rap": 500})
    rng = np.random.default_rng(0)
    out = undersample(bucket, ("pop", "rock", "rap"), rng)
    by_genre = {}
    for r in out.records:
        by_genre[r.genre] = by_genre.get(r.genre, 0) + 1
    assert by_genre == {"pop": 500, "rock": 500, "rap": 500}
    assert len(out.records) == 1500


def test_undersample_min_genre_passes_through_complete():
    bucket = bucket_with({"pop": 40, "rock": 25})
    out = undersample(bucket, ("pop", "rock"), np.random.default_rng(1))
    rock_ids = {r.id for r in out.records if r.genre == "rock"}
    assert rock_ids == {r.id for r in bucket.records if r.genre == "rock"}


def test_undersample_missing_genre_listed():
    bucket = bucket_with({"pop": 10})
    with pytest.raises(ValueError, match="rock"):
        undersample(bucket, ("pop", "rock"), np.random.default_rng(2))


def test_undersample_no_duplicates_property():
    rng = np.random.default_rng(3)
    bucket = bucket_with({"pop": 30, "rock": 17, "rnb": 24})
    for _ in range(200):
        out = undersample(bucket, ("pop", "rock", "rnb"), rng)
        ids = [r.id for r in out.records]
        assert len(ids) == len(set(ids))
        counts = {}
        for r in out.records:
            counts[r.genre] = counts.get(r.genre, 0) + 1
        assert set(counts.values()) == {17}


# ---------------------------------------------------------------------------
# popularity sampling
# ---------------------------------------------------------------------------


def test_popularity_worked_example():
    # 25/25/50 shares with 1000 of each available: 500/500/1000
    bucket = bucket_with({"country": 1000, "rock": 1000, "pop": 1000},
                         bucket_start=2000)
    table = PopularityTable(rows=[(2000, "country", 0.25),
                                  (2000, "rock", 0.25), (2000, "pop", 0.5)])
    out = popularity_sample(bucket, table, np.random.default_rng(4),
                            genres=("country", "rock", "pop"))
    counts = {}
    for r in out.records:
        counts[r.genre] = counts.get(r.genre, 0) + 1
    assert counts == {"pop": 1000, "rock": 500, "country": 500}


def test_popularity_equal_shares_behaves_like_undersample():
    bucket = bucket_with({"pop": 300, "rock": 300}, bucket_start=2000)
    table = PopularityTable(rows=[(2000, "pop", 0.5), (2000, "rock", 0.5)])
    out = popularity_sample(bucket, table, np.random.default_rng(5),
                            genres=("pop", "rock"))
    counts = {}
    for r in out.records:
        counts[r.genre] = counts.get(r.genre, 0) + 1
    assert counts == {"pop": 300, "rock": 300}


def test_popularity_zero_share_draws_nothing():
    bucket = bucket_with({"pop": 100, "rock": 100}, bucket_start=2000)
    table = PopularityTable(rows=[(2000, "pop", 1.0), (2000, "rock", 0.0)])
    out = popularity_sample(bucket, table, np.random.default_rng(6),
                            genres=("pop", "rock"))
    assert all(r.genre == "pop" for r in out.records)
    assert len(out.records) == 100


def test_popularity_missing_row_errors():
    bucket = bucket_with({"pop": 100, "rock": 100}, bucket_start=2000)
    table = PopularityTable(rows=[(2000, "pop", 1.0)])
    with pytest.raises(ValueError, match="rock"):
        popularity_sample(bucket, table, np.random.default_rng(7),
                          genres=("pop", "rock"))


def test_popularity_quotas_rounding_largest_remainder():
    quotas = popularity_quotas({"a": 7, "b": 9, "c": 9},
                               {"a": 0.5, "b": 0.3, "c": 0.2})
    # scale anchors at a: 7/0.5 = 14 -> raw {7, 4.2, 2.8} -> {7, 4, 3}
    assert quotas == {"a": 7, "b": 4, "c": 3}
    assert sum(quotas.values()) == 14


def test_popularity_quotas_never_exceed_availability():
    rng = np.random.default_rng(8)
    for _ in range(300):
        genres = [f"g{i}" for i in range(rng.integers(2, 6))]
        avail = {g: int(rng.integers(1, 500)) for g in genres}
        shares = rng.dirichlet(np.ones(len(genres)))
        quotas = popularity_quotas(avail, dict(zip(genres, shares)))
        for g in genres:
            assert 0 <= quotas[g] <= avail[g]
        # the binding genre is used in full
        assert any(quotas[g] == avail[g] for g in genres)


# ---------------------------------------------------------------------------
# repeat_average
# ---------------------------------------------------------------------------

MALE = bundled_lexicon("male")
FEMALE = bundled_lexicon("female")
COMPETENCE = bundled_lexicon("competence")


def synthetic_buckets():
    buckets = []
    for b, (ratio, gseed) in ((1970, (3.0, 1)), (1975, (2.0, 2))):
        records = []
        for genre, seed, n_tokens in (("pop", gseed, 2600),
                                      ("rock", gseed + 100, 1600)):
            for i, d in enumerate(biased_docs(seed, n_tokens=n_tokens,
                                              ratio=ratio, doc_len=45)):
                records.append(SongRecord(
                    id=f"{genre}{b}-{i}", artist=f"a{i}", title=f"t{i}",
                    year=b, genre=genre, tokens=tuple(d)))
        buckets.append(BucketCorpus(bucket_start=b, bucket_width=5,
                                    records=records))
    return buckets


def bias_analysis(sampled, train_seed):
    models = {}
    for i, bucket in enumerate(sampled):
        cfg = TrainConfig(dim=25, window=3, epochs=2, negatives=3,
                          min_count=2, seed=train_seed + i)
        models[bucket.bucket_start] = train(bucket, cfg)
    return bias_series(models, MALE, FEMALE, COMPETENCE)


def test_repeat_average_single_run_equals_plain_run():
    buckets = synthetic_buckets()
    plan = SamplePlan(mode="undersample", repeats=1, seed=11)
    summary = repeat_average(plan, buckets, bias_analysis)
    (sample_seed, train_seed), = summary.run_seeds
    rng = np.random.default_rng(sample_seed)
    sampled = [undersample(b, ("pop", "rock"), rng) for b in buckets]
    direct = bias_analysis(sampled, train_seed)
    for j, b in enumerate(summary.bucket_starts):
        assert summary.mean_bias[j] == pytest.approx(direct.mean_bias()[b],
                                                     abs=1e-15)
        assert summary.std_bias[j] == 0.0


def test_repeat_average_forced_identical_seeds_zero_dispersion():
    buckets = synthetic_buckets()
    plan = SamplePlan(mode="undersample", repeats=2, seed=0)
    summary = repeat_average(plan, buckets, bias_analysis,
                             run_seeds=[(123, 7), (123, 7)])
    assert np.allclose(summary.std_bias, 0.0)
    assert np.array_equal(summary.runs[0], summary.runs[1])


def test_repeat_average_reproducible():
    buckets = synthetic_buckets()
    plan = SamplePlan(mode="undersample", repeats=3, seed=21)
    s1 = repeat_average(plan, buckets, bias_analysis)
    s2 = repeat_average(plan, buckets, bias_analysis)
    assert np.array_equal(s1.runs, s2.runs)


def test_repeat_average_hundred_runs_near_longrun_oracle():
    # frozen oracle: the same pipeline at repeats=1000, master seed 2001
    oracle = {1970: -1.05692092e-03, 1975: -5.75704632e-05}
    buckets = synthetic_buckets()
    plan = SamplePlan(mode="undersample", repeats=100, seed=99)
    summary = repeat_average(plan, buckets, bias_analysis)
    for j, b in enumerate(summary.bucket_starts):
        bound = 2 * summary.std_bias[j] / np.sqrt(100)
        assert abs(summary.mean_bias[j] - oracle[b]) <= bound


def test_repeat_average_failure_names_run():
    buckets = synthetic_buckets()
    plan = SamplePlan(mode="undersample", repeats=3, seed=5)

    calls = {"n": 0}

    def flaky(sampled, train_seed):
        calls["n"] += 1
        if calls["n"] == 2:
            raise ValueError("boom")
        return bias_analysis(sampled, train_seed)

    with pytest.raises(RuntimeError, match="run 1 failed"):
        repeat_average(plan, buckets, flaky)


def test_repeat_average_popularity_needs_table():
    buckets = synthetic_buckets()
    plan = SamplePlan(mode="popularity", repeats=1, seed=1)
    with pytest.raises(ValueError, match="PopularityTable"):
        repeat_average(plan, buckets, bias_analysis)


def test_derive_run_seeds_stable_and_distinct():
    seeds = derive_run_seeds(42, 50)
    assert seeds == derive_run_seeds(42, 50)
    assert len(set(seeds)) == 50


def test_write_run_log(tmp_path):
    buckets = synthetic_buckets()
    plan = SamplePlan(mode="undersample", repeats=2, seed=13)
    summary = repeat_average(plan, buckets, bias_analysis)
    path = tmp_path / "runs.csv"
    write_run_log_csv(summary, path, header_comment="manifest: x")
    lines = path.read_text().splitlines()
    assert lines[1] == "run,bucket_start,mean_bias"
    assert len(lines) == 2 + 2 * len(summary.bucket_starts)
