from hypothesis import given, strategies as st

from pantryplan.rng import SplitMix64, sample_indices

MASK = (1 << 64) - 1


def splitmix64_reference(seed, count):
    """Independent step-by-step trace of the generator, kept separate from
    the implementation on purpose."""
    state = seed & MASK
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


def test_stream_matches_reference_trace():
    rng = SplitMix64(42)
    assert [rng.next_u64() for _ in range(5)] == splitmix64_reference(42, 5)


def test_sample_golden_seed_42():
    # hand trace: draws mod (10, 9, 8) are 3, 1, 2 -> selections 3, 2, 4
    draws = splitmix64_reference(42, 3)
    assert [d % (10 - i) for i, d in enumerate(draws)] == [3, 1, 2]
    assert sample_indices(10, 3, 42) == [3, 2, 4]


@given(st.integers(0, MASK), st.integers(1, 40), st.integers(0, 40))
def test_sample_is_subset_without_repeats(seed, n, k):
    k = min(k, n)
    picked = sample_indices(n, k, seed)
    assert len(picked) == k
    assert len(set(picked)) == k
    assert all(0 <= i < n for i in picked)


@given(st.integers(0, MASK))
def test_sample_deterministic(seed):
    assert sample_indices(25, 10, seed) == sample_indices(25, 10, seed)


def test_shuffle_is_seeded_permutation():
    items = list(range(12))
    a, b = list(items), list(items)
    SplitMix64(9).shuffle(a)
    SplitMix64(9).shuffle(b)
    assert a == b
    assert sorted(a) == items
