import numpy as np
import pytest

from latentprobe.align import (AlignmentMapping, aggregate_aligned, apply_mapping,
                               greedy_align, split_informative)
from latentprobe.assoc import AssociationMatrix
from latentprobe.errors import ConfigError

NAMES = ("a", "b", "c", "d", "e", "f", "g", "h")


def matrix(values, mean_kl, kind="fvh_lt_variance"):
    values = np.asarray(values, dtype=float)
    return AssociationMatrix(values=values, kind=kind,
                             mean_kl=np.asarray(mean_kl, dtype=float),
                             feature_names=NAMES[:values.shape[1]])


def test_split_two_high_three_low():
    split = split_informative([8.0, 8.0, 0.003, 0.003, 0.003])
    assert split.informative == (0, 1)
    assert split.low_centroid == pytest.approx(0.003)
    assert split.high_centroid == pytest.approx(8.0)


def test_split_all_equal_is_empty():
    split = split_informative([0.25, 0.25, 0.25])
    assert split.informative == ()
    assert split.low_centroid == split.high_centroid == 0.25


def test_split_span_boundary():
    # spread at exactly 1e-6 still counts as flat; just above it separates
    assert split_informative([1.0, 1.0 + 1e-6]).informative == ()
    assert split_informative([1.0, 1.0 + 2e-6]).informative == (1,)


def test_split_two_values():
    assert split_informative([0.0, 10.0]).informative == (1,)


def test_split_centroids():
    split = split_informative([1.0, 2.0, 10.0, 11.0])
    assert split.informative == (2, 3)
    assert split.low_centroid == 1.5
    assert split.high_centroid == 10.5


def test_split_needs_two_dims():
    with pytest.raises(ConfigError):
        split_informative([5.0])
    with pytest.raises(ConfigError):
        split_informative([])


def test_split_is_globally_optimal():
    # compare against every 2-partition by within-cluster sum of squares;
    # the 1-D optimum must be among them
    rng = np.random.default_rng(0)
    for _ in range(50):
        v = rng.uniform(0.0, 5.0, size=5)
        split = split_informative(v)
        if not split.informative:
            continue
        hi = set(split.informative)
        def sse(subset):
            a = v[list(subset)]
            b = v[[i for i in range(5) if i not in subset]]
            total = 0.0
            for part in (a, b):
                if part.size:
                    total += float(np.sum((part - part.mean()) ** 2))
            return total
        got = sse(hi)
        best = min(sse(set(c)) for c in _proper_subsets(5))
        assert got <= best + 1e-12


def _proper_subsets(k):
    for mask in range(1, 2 ** k - 1):
        yield [i for i in range(k) if mask >> i & 1]


def base_rows():
    return np.array([
        [5.0, 0.1, 0.0, 0.2, 0.0, 0.1, 0.3, 0.0],
        [0.1, 6.0, 5.5, 0.0, 0.2, 0.0, 0.1, 0.2],
        [0.0, 0.1, 0.2, 4.0, 4.5, 0.1, 0.0, 0.1],
        [0.2, 0.0, 0.1, 0.1, 0.0, 3.5, 3.0, 2.8],
    ])


def test_identity_alignment():
    # three clearly informative dims; the fourth is the forced leftover
    kl = [2.0, 2.2, 2.4, 0.01]
    runs = [matrix(base_rows(), kl), matrix(base_rows(), kl)]
    mapping = greedy_align(runs)
    assert mapping.reference_run == 0
    assert mapping.maps[0] == (0, 1, 2, 3)
    assert mapping.maps[1] == (0, 1, 2, 3)
    assert all(p.by == "reference" for p in mapping.provenance[0])
    assert [p.by for p in mapping.provenance[1]] == ["correlation"] * 3 + ["random"]
    assert all(p.correlation == pytest.approx(1.0)
               for p in mapping.provenance[1][:3])


def test_reference_is_run_with_most_informative_dims():
    rows = base_rows()
    runs = [matrix(rows, [2.0, 2.1, 0.01, 0.02]),
            matrix(rows, [2.0, 2.1, 1.9, 0.02])]
    mapping = greedy_align(runs)
    assert mapping.reference_run == 1


def test_permutation_recovery_exact_and_noisy():
    rng = np.random.default_rng(1)
    rows = base_rows()
    kl = np.array([3.0, 2.5, 2.8, 0.01])
    for trial in range(100):
        perm = rng.permutation(4)
        permuted_rows = rows[perm]
        noise = np.abs(rng.normal(scale=0.01, size=rows.shape)) if trial % 2 else 0.0
        run2 = matrix(permuted_rows + noise, kl[perm])
        mapping = greedy_align([matrix(rows, kl), run2], rho=0.5, seed=trial)
        # dimension j of run2 holds reference row perm[j]; the single
        # non-informative dim is the only leftover, so it is forced too
        assert mapping.maps[1] == tuple(int(i) for i in perm)
        informative = [j for j in range(4) if kl[perm][j] > 1.0]
        assert all(mapping.provenance[1][j].by == "correlation" for j in informative)


def test_low_correlation_rows_fall_to_random_assignment():
    rng = np.random.default_rng(2)
    rows = base_rows()
    kl = [2.0, 2.1, 2.2, 1.9]
    scrambled = rng.uniform(0.0, 1.0, size=rows.shape)
    runs = [matrix(rows, kl), matrix(scrambled, kl)]
    mapping = greedy_align(runs, rho=0.9999)
    assert all(p.by == "random" for p in mapping.provenance[1])
    assert sorted(mapping.maps[1]) == [0, 1, 2, 3]
    # reproducible per seed, and sensitive to it
    again = greedy_align(runs, rho=0.9999, seed=0)
    assert again.maps == mapping.maps
    seeds = {greedy_align(runs, rho=0.9999, seed=s).maps[1] for s in range(8)}
    assert len(seeds) > 1


def test_zero_variance_row_gets_zero_correlation():
    rows = base_rows()
    kl = [2.0, 2.1, 2.2, 1.9]
    flat = rows.copy()
    flat[2] = 0.7  # constant row has no variance to correlate
    mapping = greedy_align([matrix(rows, kl), matrix(flat, kl)])
    assert mapping.provenance[1][2].by == "random"


def test_tie_breaks_take_smallest_index_pair():
    # reference rows 0 and 1 identical: run row 0 correlates 1.0 with both,
    # and the greedy step must take reference row 0 first
    rows = np.array([
        [1.0, 2.0, 3.0, 4.0],
        [1.0, 2.0, 3.0, 4.0],
        [4.0, 3.0, 2.0, 1.0],
    ])
    runs = [matrix(rows, [2.0, 2.1, 2.2]),
            matrix(rows[[0, 2, 1]], [2.0, 2.2, 2.1])]
    mapping = greedy_align(runs)
    assert mapping.maps[1][0] == 0


def test_align_input_validation():
    with pytest.raises(ConfigError):
        greedy_align([])
    a = matrix(base_rows(), [1.0, 2.0, 3.0, 4.0])
    b = matrix(base_rows()[:3], [1.0, 2.0, 3.0])
    with pytest.raises(ConfigError, match="run 1"):
        greedy_align([a, b])


def test_apply_mapping_places_rows():
    m = matrix(base_rows(), [1.0, 2.0, 3.0, 4.0])
    out = apply_mapping(m, (2, 0, 3, 1))
    for j, dst in enumerate((2, 0, 3, 1)):
        np.testing.assert_array_equal(out.values[dst], m.values[j])
        assert out.mean_kl[dst] == m.mean_kl[j]
    with pytest.raises(ConfigError):
        apply_mapping(m, (0, 0, 1, 2))


def test_aggregate_of_permuted_copies_recovers_reference():
    rows = base_rows()
    kl = np.array([3.0, 2.5, 2.8, 0.01])
    ref = matrix(rows, kl)
    perm = np.array([2, 0, 3, 1])
    run2 = matrix(rows[perm], kl[perm])
    mapping = greedy_align([ref, run2])
    agg = aggregate_aligned([ref, run2], mapping)
    np.testing.assert_allclose(agg.values, rows, atol=1e-12)
    np.testing.assert_allclose(agg.mean_kl, kl, atol=1e-12)
    assert agg.informative == (0, 1, 2)
    assert agg.kind == "fvh_lt_variance"


def test_aggregate_validation():
    a = matrix(base_rows(), [1.0, 2.0, 3.0, 4.0])
    mapping = greedy_align([a])
    with pytest.raises(ConfigError):
        aggregate_aligned([], mapping)
    with pytest.raises(ConfigError, match="mapping covers"):
        aggregate_aligned([a, a], mapping)
    b = matrix(base_rows(), [1.0, 2.0, 3.0, 4.0], kind="dbsr_magnitude")
    with pytest.raises(ConfigError, match="kind"):
        aggregate_aligned([a, b], greedy_align([a, a]))


def test_mapping_serialization_shape():
    rows = base_rows()
    kl = [2.0, 2.1, 2.2, 0.01]
    mapping = greedy_align([matrix(rows, kl), matrix(rows, kl)])
    blob = mapping.to_json_dict()
    assert blob["reference_run"] == 0
    assert blob["maps"] == [[0, 1, 2, 3], [0, 1, 2, 3]]
    assert blob["provenance"][1][0]["by"] == "correlation"
