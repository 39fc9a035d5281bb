import numpy as np
import pytest

from mmrecon.matrix import (
    ConstructionError,
    DegreeProfile,
    MatrixEnsemble,
    ParityCheckMatrix,
    build_ensemble,
    code_rate,
    peg_construct,
)


def edge_set(matrix):
    return {
        (j, int(v))
        for j in range(matrix.m)
        for v in matrix.row_adj(j)
    }


def test_peg_column_degrees_exact():
    h = peg_construct(8, 4, DegreeProfile.regular(2), seed=7)
    assert list(h.column_degrees()) == [2] * 8
    assert len(edge_set(h)) == h.edge_count == 16


def test_peg_deterministic():
    a = peg_construct(8, 4, DegreeProfile.regular(2), seed=7)
    b = peg_construct(8, 4, DegreeProfile.regular(2), seed=7)
    assert a == b
    c = peg_construct(8, 4, DegreeProfile.regular(2), seed=8)
    assert a != c


def test_peg_infeasible_degree():
    with pytest.raises(ConstructionError, match="degree"):
        peg_construct(4, 2, DegreeProfile.regular(3), seed=1)


def test_degree_profile_validation():
    with pytest.raises(ValueError):
        DegreeProfile.regular(1)
    with pytest.raises(ValueError):
        DegreeProfile(column_degrees=(3, 1, 3))
    with pytest.raises(ValueError):
        DegreeProfile(column_degree=3, column_degrees=(3, 3))
    with pytest.raises(ConstructionError):
        DegreeProfile(column_degrees=(3, 3)).resolve(3, 8)


def test_explicit_profile():
    h = peg_construct(10, 5, DegreeProfile(column_degrees=(2, 3, 2, 3, 2, 3, 2, 3, 2, 3)), seed=3)
    assert list(h.column_degrees()) == [2, 3, 2, 3, 2, 3, 2, 3, 2, 3]


def test_transpose_consistency_exhaustive():
    rng = np.random.default_rng(11)
    for seed in range(6):
        n = int(rng.integers(12, 60))
        m = n // 2
        h = peg_construct(n, m, DegreeProfile.regular(3), seed=seed)
        from_rows = edge_set(h)
        from_cols = {
            (int(c), i)
            for i in range(h.n)
            for c in h.col_adj(i)
        }
        assert from_rows == from_cols
        assert h.edge_count == int(h.row_degrees().sum()) == int(h.column_degrees().sum())


def test_peg_girth_at_least_four():
    for seed in range(8):
        h = peg_construct(48, 24, DegreeProfile.regular(3), seed=seed)
        assert h.girth() >= 4


def test_peg_girth_beats_random_baseline():
    # PEG should avoid 4-cycles at sizes where they are easily avoidable
    h = peg_construct(256, 128, DegreeProfile.regular(3), seed=5)
    assert h.girth() >= 6


def test_no_parallel_edges_rejected():
    with pytest.raises(ValueError, match="parallel"):
        ParityCheckMatrix.from_check_adjacency(4, 2, [np.array([0, 0, 1]), np.array([2, 3])])


def test_matrix_shape_validation():
    with pytest.raises(ValueError):
        ParityCheckMatrix.from_check_adjacency(4, 4, [np.array([0])] * 4)
    with pytest.raises(ValueError, match="degree 0"):
        ParityCheckMatrix.from_check_adjacency(4, 2, [np.array([0, 1]), np.array([1, 2])])


def test_build_ensemble_members_distinct():
    ens = build_ensemble(1 << 12, 1 << 11, DegreeProfile.regular(3), u=3, base_seed=17)
    assert ens.u == 3
    sets = [edge_set(h) for h in ens.matrices]
    for a in range(3):
        for b in range(a + 1, 3):
            assert sets[a] != sets[b]
            assert (ens.matrices[a].n, ens.matrices[a].m) == (ens.matrices[b].n, ens.matrices[b].m)


def test_build_ensemble_u_validation():
    with pytest.raises(ValueError):
        build_ensemble(16, 8, DegreeProfile.regular(3), u=0, base_seed=1)
    single = build_ensemble(16, 8, DegreeProfile.regular(3), u=1, base_seed=1)
    assert single.u == 1


def test_ensemble_rejects_duplicates():
    h = peg_construct(16, 8, DegreeProfile.regular(3), seed=2)
    with pytest.raises(ValueError, match="identical"):
        MatrixEnsemble((h, h))


def test_ensemble_prefix():
    ens = build_ensemble(32, 16, DegreeProfile.regular(3), u=3, base_seed=5)
    assert ens.prefix(2).u == 2
    assert ens.prefix(2).matrices == ens.matrices[:2]
    with pytest.raises(ValueError):
        ens.prefix(4)


def test_code_rate():
    h = peg_construct(1 << 6, 1 << 5, DegreeProfile.regular(3), seed=1)
    assert code_rate(h) == 0.5
    h = peg_construct(20, 4, DegreeProfile.regular(3), seed=1)
    assert code_rate(h) == pytest.approx(0.8)
    h = peg_construct(8, 7, DegreeProfile.regular(2), seed=1)
    assert code_rate(h) == pytest.approx(1 / 8)


def test_content_hash_tracks_edges():
    a = peg_construct(16, 8, DegreeProfile.regular(3), seed=2)
    b = peg_construct(16, 8, DegreeProfile.regular(3), seed=3)
    assert a.content_hash() != b.content_hash()
    assert a.content_hash() == peg_construct(16, 8, DegreeProfile.regular(3), seed=2).content_hash()
