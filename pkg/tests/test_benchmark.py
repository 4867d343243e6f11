from noc_sentinel.analysis.clustering import Algorithm
from noc_sentinel.analysis.distance import DTW, EUCLIDEAN, MANHATTAN
from noc_sentinel.errors import InvalidArgumentError
from noc_sentinel.ids.benchmark import BENCH_COLUMNS, FAMILIES, gen_shape_benchmark, run_benchmark
import numpy as np
import pytest


def test_benchmark_shape_and_labels():
    bench = gen_shape_benchmark(families=4, count=5, width=12, seed=0)
    assert bench.data.shape == (20, 12)
    assert bench.labels.tolist() == [0] * 5 + [1] * 5 + [2] * 5 + [3] * 5
    assert bench.families == ("constant", "ramp", "spike", "square")
    assert (bench.data >= 0).all()


def test_noise_free_items_repeat_their_family():
    bench = gen_shape_benchmark(count=3, seed=1)
    for label in range(len(bench.families)):
        rows = bench.data[bench.labels == label]
        assert (rows == rows[0]).all()
    assert len(np.unique(bench.data, axis=0)) == len(FAMILIES)


def test_noise_is_seeded():
    a = gen_shape_benchmark(noise=0.1, seed=3)
    b = gen_shape_benchmark(noise=0.1, seed=3)
    c = gen_shape_benchmark(noise=0.1, seed=4)
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


@pytest.mark.parametrize("kw", [{"families": 1}, {"families": ["ramp", "zigzag"]}, {"count": 0}, {"noise": -0.1}])
def test_benchmark_validation(kw):
    with pytest.raises(InvalidArgumentError):
        gen_shape_benchmark(**kw)


def test_noise_free_benchmark_scores_perfectly():
    bench = gen_shape_benchmark(count=6, width=16, seed=0)
    table = run_benchmark(bench, seed=0)
    assert table.columns.tolist() == BENCH_COLUMNS
    assert len(table) == 3 * 4
    unsupported = table[table.status == "unsupported"]
    assert [(r.algorithm, r.metric) for r in unsupported.itertuples()] == [("kmeans", "dtw")]
    assert unsupported[["rand", "jaccard", "folkes_mallows"]].isna().all().all()
    ok = table[table.status == "ok"]
    assert (ok[["rand", "jaccard", "folkes_mallows"]] == 1.0).all().all()


def test_benchmark_subset_of_cells():
    bench = gen_shape_benchmark(families=3, count=4, noise=0.02, width=16, seed=2)
    table = run_benchmark(bench, algorithms=[Algorithm.KMEDOIDS], metrics=[EUCLIDEAN, DTW], seed=1)
    assert table.metric.tolist() == ["euclidean", "dtw"]
    assert (table.rand.between(0, 1)).all()


def test_noisy_benchmark_still_recovers_families():
    bench = gen_shape_benchmark(count=20, noise=0.05, width=32, seed=4)
    table = run_benchmark(
        bench, algorithms=[Algorithm.KMEDOIDS, Algorithm.AGGLOMERATIVE], metrics=[MANHATTAN, EUCLIDEAN], seed=0
    )
    assert (table.status == "ok").all()
    assert (table.rand >= 0.95).all(), table
