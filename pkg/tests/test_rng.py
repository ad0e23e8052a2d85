import numpy as np
from hypothesis import given, strategies as st

from blindcs.rng import derive_seed, make_rng


@given(st.integers(0, 2**63), st.lists(st.one_of(st.integers(0, 2**40), st.text(max_size=8)), max_size=3))
def test_streams_reproducible(seed, keys):
    a = make_rng(seed, *keys).standard_normal(4)
    b = make_rng(seed, *keys).standard_normal(4)
    assert np.array_equal(a, b)
    assert derive_seed(seed, *keys) == derive_seed(seed, *keys)


def test_keys_separate_streams():
    assert not np.array_equal(make_rng(1, 3).random(3), make_rng(1, 4).random(3))
    assert not np.array_equal(make_rng(1, "a").random(3), make_rng(1, "b").random(3))
    assert derive_seed(0, "E1", 0) != derive_seed(0, "E1", 1)
