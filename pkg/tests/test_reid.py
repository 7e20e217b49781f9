import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reface3d.errors import DegenerateTies, EmptyInput, IdenticalFacePairWarning, ParseError, ZeroVector
from reface3d.reid import (
    cosine_distance,
    kruskal_wallis,
    pair_records,
    read_embeddings,
    reid_summary,
    relative_overlap,
    select_model,
)


class TestCosineDistance:
    def test_identical(self):
        v = np.array([1.0, 2.0, 3.0])
        assert cosine_distance(v, v) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(1.0)

    def test_antipodal(self):
        v = np.array([1.0, -2.0])
        assert cosine_distance(v, -v) == pytest.approx(2.0)

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            cosine_distance(np.zeros(3), np.ones(3))

    @settings(max_examples=50, deadline=None)
    @given(
        seed=st.integers(0, 2**31),
        alpha=st.floats(0.01, 100.0),
        beta=st.floats(0.01, 100.0),
    )
    def test_symmetry_scale_invariance_range(self, seed, alpha, beta):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=8)
        b = rng.normal(size=8)
        d = cosine_distance(a, b)
        assert 0.0 <= d <= 2.0 + 1e-12
        assert d == pytest.approx(cosine_distance(b, a), abs=1e-12)
        assert d == pytest.approx(cosine_distance(alpha * a, beta * b), abs=1e-9)


class TestReidSummary:
    def test_identical_pairs_fully_identifiable(self):
        v = np.array([1.0, 2.0])
        with pytest.warns(IdenticalFacePairWarning):
            s = reid_summary([(v, v), (v, v)])
        assert s.pct_identifiable == 100.0
        assert s.mean_distance == pytest.approx(0.0, abs=1e-12)

    def test_hand_fixture(self):
        # distances exactly 0.2 and 0.6 via planar rotations
        def unit(angle):
            return np.array([np.cos(angle), np.sin(angle)])

        a1, b1 = unit(0.0), unit(np.arccos(0.8))
        a2, b2 = unit(0.0), unit(np.arccos(0.4))
        s = reid_summary([(a1, b1), (a2, b2)], threshold=0.4)
        assert s.mean_distance == pytest.approx(0.4, abs=1e-9)
        assert s.pct_identifiable == pytest.approx(50.0)
        assert s.mean_inverse_distance == pytest.approx((5.0 + 1.0 / 0.6) / 2.0, abs=1e-9)
        assert s.std_distance == pytest.approx(0.2, abs=1e-9)

    def test_x100_scale(self):
        v, w = np.array([1.0, 0.0]), np.array([0.8, 0.6])
        s = reid_summary([(v, w)]).to_x100()
        assert s.scale == "x100"
        assert s.threshold == pytest.approx(40.0)
        assert s.mean_distance == pytest.approx(100.0 * 0.2, abs=1e-6)

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(2)
        pairs = [(rng.normal(size=4), rng.normal(size=4)) for _ in range(40)]
        pcts = [reid_summary(pairs, threshold=t).pct_identifiable for t in (0.1, 0.4, 0.8, 1.5)]
        assert all(a <= b for a, b in zip(pcts, pcts[1:]))

    def test_empty(self):
        with pytest.raises(EmptyInput):
            reid_summary([])

    def test_default_threshold_documented(self):
        v, w = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        assert reid_summary([(v, w)]).threshold == 0.4


class TestKruskalWallis:
    def test_identical_groups_zero(self):
        assert kruskal_wallis([[1, 2, 3], [1, 2, 3]]) == pytest.approx(0.0, abs=1e-12)

    def test_separated_groups(self):
        assert kruskal_wallis([[1, 2, 3], [4, 5, 6]]) == pytest.approx(3.857142857142857, abs=1e-9)

    def test_all_identical_degenerate(self):
        with pytest.raises(DegenerateTies):
            kruskal_wallis([[5, 5], [5, 5]])

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31), shift=st.floats(0.1, 10.0), scale=st.floats(0.1, 10.0))
    def test_monotone_transform_invariance(self, seed, shift, scale):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=8).tolist()
        b = rng.normal(loc=1.0, size=9).tolist()
        h1 = kruskal_wallis([a, b])
        h2 = kruskal_wallis([[scale * v + shift for v in a], [scale * v + shift for v in b]])
        assert h1 == pytest.approx(h2, abs=1e-9)


class TestRelativeOverlap:
    def test_identical_is_one(self):
        assert relative_overlap([1, 2, 3, 4], [1, 2, 3, 4]) == pytest.approx(1.0)

    def test_disjoint_is_zero(self):
        assert relative_overlap([0.0, 1.0], [10.0, 11.0]) == pytest.approx(0.0)

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=100)
        b = rng.normal(loc=0.5, size=100)
        assert relative_overlap(a, b) == pytest.approx(relative_overlap(b, a))

    def test_half_shifted_uniform(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(0.0, 1.0, size=1000)
        b = rng.uniform(0.5, 1.5, size=1000)
        assert relative_overlap(a, b) == pytest.approx(0.5, abs=0.05)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            relative_overlap([], [1.0])


class TestSelectModel:
    def test_singleton(self):
        rng = np.random.default_rng(0)
        scores = select_model({"only": (rng.normal(size=20).tolist(),
                                        rng.normal(loc=3, size=20).tolist())})
        assert scores[0].rank == 1

    def test_lower_overlap_wins(self):
        rng = np.random.default_rng(1)
        im = rng.normal(loc=0.0, scale=1.0, size=60).tolist()
        well_separated = (rng.normal(loc=6.0, scale=1.0, size=60).tolist(), im)
        overlapping = (rng.normal(loc=0.5, scale=1.0, size=60).tolist(), im)
        scores = select_model({"A": well_separated, "B": overlapping})
        assert [s.name for s in scores] == ["A", "B"]
        assert scores[0].overlap < scores[1].overlap


class TestEmbeddingIo:
    def test_read_and_pair(self, tmp_path):
        path = tmp_path / "emb.csv"
        path.write_text(
            "# comment\n"
            "s1,ses1,original,1.0,0.0\n"
            "s1,ses1,toolA,0.8,0.6\n"
            "s2,ses1,original,0.0,1.0\n"
            "s2,ses1,toolA,0.6,0.8\n"
            "s3,ses1,toolA,1.0,1.0\n"  # no original -> unpaired
        )
        records = read_embeddings(path)
        assert len(records) == 5
        pairs = pair_records(records, "toolA")
        assert len(pairs) == 2

    def test_bad_line_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("s1,ses1,original\n")
        with pytest.raises(ParseError):
            read_embeddings(path)

    def test_bad_float_rejected(self, tmp_path):
        path = tmp_path / "bad2.csv"
        path.write_text("s1,ses1,original,abc\n")
        with pytest.raises(ParseError):
            read_embeddings(path)
