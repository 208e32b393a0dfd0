"""k-NN search and the rank-weighted multi-neighbor classifier."""

import numpy as np
import pytest

from sba import (
    IncompleteError,
    MultiNeighborClassifier,
    NeighborList,
    ParamError,
    evaluate_accuracy,
    knn,
    mn_classify,
)


def _neighbors(labels):
    return NeighborList(
        "q", [(f"i{k}", label, float(k)) for k, label in enumerate(labels)]
    )


class TestKnn:
    def test_exact_duplicate_is_first(self, rng):
        db = rng.random((10, 5))
        labels = [f"c{k % 3}" for k in range(10)]
        ids = [f"i{k}" for k in range(10)]
        nn = knn(db[6], db, ids, labels, k=1)
        assert nn.neighbors[0][0] == "i6"
        assert nn.neighbors[0][2] == 0.0

    def test_full_k_gives_sorted_list(self, rng):
        db = rng.random((8, 4))
        labels = ["a"] * 8
        ids = [f"i{k}" for k in range(8)]
        nn = knn(rng.random(4), db, ids, labels, k=8)
        dists = [d for _, _, d in nn.neighbors]
        assert dists == sorted(dists)
        assert len(nn.neighbors) == 8

    def test_matches_sort_oracle_prefix(self, rng):
        db = rng.random((50, 6))
        labels = [f"c{k % 4}" for k in range(50)]
        ids = [f"i{k}" for k in range(50)]
        q = rng.random(6)
        full = knn(q, db, ids, labels, k=50)
        for k in (1, 5, 20):
            assert knn(q, db, ids, labels, k=k).neighbors == full.neighbors[:k]

    def test_k_too_large(self, rng):
        db = rng.random((5, 3))
        with pytest.raises(ParamError):
            knn(np.zeros(3), db, list("abcde"), ["x"] * 5, k=6)

    def test_unlabeled_entry_rejected(self, rng):
        db = rng.random((3, 2))
        with pytest.raises(ParamError):
            knn(np.zeros(2), db, list("abc"), ["x", None, "y"], k=2)


class TestMnClassify:
    def test_trace_k3(self):
        table = mn_classify(_neighbors(["A", "B", "A"]))
        assert table.scores == {"A": 2, "B": 1}
        assert table.predicted == "A"

    def test_trace_k1_reduces_to_nn(self):
        table = mn_classify(_neighbors(["B"]))
        assert table.scores == {"B": 0}
        assert table.predicted == "B"

    def test_trace_k2(self):
        table = mn_classify(_neighbors(["A", "B"]))
        assert table.scores == {"A": 1, "B": 0}
        assert table.predicted == "A"

    def test_score_tie_goes_to_nearer_neighbor(self):
        # K=4: A at ranks 1,4 -> 3+0, B at ranks 2,3 -> 2+1; tie at 3
        table = mn_classify(_neighbors(["A", "B", "B", "A"]))
        assert table.scores == {"A": 3, "B": 3}
        assert table.predicted == "A"

    def test_unanimous_neighbors(self):
        assert mn_classify(_neighbors(["C"] * 7)).predicted == "C"

    def test_score_mass_conservation(self, rng):
        for _ in range(50):
            big_k = int(rng.integers(1, 20))
            labels = [f"c{v}" for v in rng.integers(0, 4, size=big_k)]
            table = mn_classify(_neighbors(labels))
            assert sum(table.scores.values()) == big_k * (big_k - 1) // 2

    def test_plus_one_scheme(self):
        table = mn_classify(_neighbors(["A", "B", "A"]), weight_scheme="plus-one")
        assert table.scores == {"A": 3 + 1, "B": 2}
        assert table.predicted == "A"

    def test_distance_monotone_transform_invariance(self, rng):
        for _ in range(100):
            big_k = int(rng.integers(1, 12))
            labels = [f"c{v}" for v in rng.integers(0, 3, size=big_k)]
            dists = np.sort(rng.random(big_k))
            base = NeighborList(
                "q", [(f"i{k}", lab, float(d))
                      for k, (lab, d) in enumerate(zip(labels, dists))]
            )
            squashed = NeighborList(
                "q", [(i, lab, float(np.log1p(d) * 3 + 1))
                      for i, lab, d in base.neighbors]
            )
            assert mn_classify(base).predicted == mn_classify(squashed).predicted

    def test_k1_agrees_with_nn_on_random_data(self, rng):
        db = rng.random((30, 5))
        labels = [f"c{v}" for v in rng.integers(0, 5, size=30)]
        ids = [f"i{k}" for k in range(30)]
        for _ in range(200):
            q = rng.random(5)
            nn1 = knn(q, db, ids, labels, k=1)
            assert mn_classify(nn1).predicted == nn1.neighbors[0][1]


class TestEvaluateAccuracy:
    def test_all_correct(self):
        truth = {"a": "x", "b": "y"}
        assert evaluate_accuracy(truth, {"a": "x", "b": "y"}) == 1.0

    def test_half_correct(self):
        truth = {"a": "x", "b": "y"}
        assert evaluate_accuracy(truth, {"a": "x", "b": "z"}) == 0.5

    def test_missing_prediction(self):
        with pytest.raises(IncompleteError):
            evaluate_accuracy({"a": "x"}, {})


class TestEstimator:
    def test_fit_predict(self, rng):
        x = np.vstack([rng.random((20, 4)), rng.random((20, 4)) + 3.0])
        y = ["low"] * 20 + ["high"] * 20
        clf = MultiNeighborClassifier(k=5).fit(x, y)
        preds = clf.predict(np.array([[0.5] * 4, [3.5] * 4]))
        assert list(preds) == ["low", "high"]

    def test_k_clamped_with_warning(self, rng):
        x = rng.random((4, 3))
        clf = MultiNeighborClassifier(k=40).fit(x, ["a", "a", "b", "b"])
        with pytest.warns(UserWarning, match="clamping"):
            clf.predict(x[:1])

    def test_mn_beats_nn_on_noisy_clusters(self):
        # clustered data with label noise: rank-weighted voting should not
        # do worse than single-neighbor classification on average
        rng = np.random.default_rng(99)
        centers = np.eye(5) * 4.0
        x, y = [], []
        for c in range(5):
            pts = centers[c] + rng.standard_normal((60, 5)) * 1.6
            x.append(pts)
            labels = [f"c{c}"] * 60
            flip = rng.choice(60, size=9, replace=False)  # 15% label noise
            for f in flip:
                labels[f] = f"c{int(rng.integers(0, 5))}"
            y.extend(labels)
        x = np.vstack(x)
        tests = np.vstack([centers[c] + rng.standard_normal((20, 5)) * 1.6
                           for c in range(5)])
        truth = {str(i): f"c{i // 20}" for i in range(100)}

        def accuracy(k):
            clf = MultiNeighborClassifier(k=k).fit(x, y)
            preds = clf.predict(tests)
            return evaluate_accuracy(truth,
                                     {str(i): p for i, p in enumerate(preds)})

        assert accuracy(15) > accuracy(1)
