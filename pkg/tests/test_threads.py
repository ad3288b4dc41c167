import os

import numpy as np
import pytest

from pointkit import KdTree, get_num_threads, num_threads, set_num_threads
from pointkit._threads import ENV_VAR, chunk_bounds, parallel_chunks


def test_env_and_override(monkeypatch):
    monkeypatch.setenv(ENV_VAR, "3")
    assert get_num_threads() == 3
    with num_threads(2):
        assert get_num_threads() == 2
        with num_threads(5):
            assert get_num_threads() == 5
        assert get_num_threads() == 2
    assert get_num_threads() == 3
    monkeypatch.delenv(ENV_VAR)
    assert get_num_threads() == (os.cpu_count() or 1)
    monkeypatch.setenv(ENV_VAR, "x")
    with pytest.raises(ValueError, match=ENV_VAR):
        get_num_threads()
    with pytest.raises(ValueError):
        set_num_threads(0)
    set_num_threads(None)


def test_chunks_cover_range_in_order():
    for n, parts in ((10, 3), (5, 8), (1, 1), (10_000, 4)):
        b = chunk_bounds(n, parts)
        assert b[0][0] == 0 and b[-1][1] == n
        assert all(x[1] == y[0] for x, y in zip(b, b[1:]))
    out = parallel_chunks(lambda a, b: np.arange(a, b), 20_000, threads=4, min_chunk=1000)
    assert len(out) == 4 and np.array_equal(np.concatenate(out), np.arange(20_000))
    assert parallel_chunks(lambda a, b: 1, 0, threads=4) == []


def test_batch_queries_independent_of_threads():
    rng = np.random.default_rng(0)
    P = rng.normal(size=(20_000, 3))
    Q = rng.normal(size=(9000, 3))
    t = KdTree(P)
    a = t.knn_batch(Q, 8, threads=1)
    b = t.knn_batch(Q, 8, threads=4)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
