import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from traplab.parallel import batch_generators, batch_sizes, run_batches


@given(n=st.integers(0, 10_000), b=st.integers(1, 3000))
def test_batch_sizes_partition(n, b):
    sizes = batch_sizes(n, b)
    assert sum(sizes) == n
    assert all(0 < s <= b for s in sizes)


@given(seed=st.integers(0, 2**64 - 1), k=st.integers(1, 8))
def test_generators_independent_of_count(seed, k):
    # the first k streams do not depend on how many are requested
    a = [g.random() for g in batch_generators(seed, k)]
    b = [g.random() for g in batch_generators(seed, k + 3)][:k]
    assert a == b


def test_streams_differ():
    x = batch_generators(1, 1, stream=0)[0].random()
    y = batch_generators(1, 1, stream=1)[0].random()
    assert x != y


def test_run_batches_keeps_order():
    out = run_batches(lambda v: v * v, range(50), workers=4)
    assert out == [v * v for v in range(50)]
    assert np.array_equal(run_batches(np.sqrt, [4.0], workers=3), [2.0])
