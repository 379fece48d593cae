import numpy as np
import pytest

from vpiseg.metrics import EvalReport, RocPoint, auc, build_report, confusion, dice, roc_curve


def mask(arr):
    return np.asarray(arr, dtype=np.uint8)


def roc_oracle(scores, labels):
    """Brute-force sweep: confusion counts re-derived at every threshold."""
    scores = np.asarray(scores, float)
    labels = np.asarray(labels, int)
    pos = labels.sum()
    neg = labels.size - pos
    pts = [(0.0, 0.0, np.inf)]
    for t in sorted(set(scores), reverse=True):
        pred = scores >= t
        tp = int(np.sum(pred & (labels == 1)))
        fp = int(np.sum(pred & (labels == 0)))
        pts.append((fp / neg, tp / pos, t))
    return pts


def auc_pairwise_oracle(scores, labels):
    """Mann-Whitney statistic: P(s+ > s-) + 0.5 P(s+ = s-) over all pairs."""
    scores = np.asarray(scores, float)
    labels = np.asarray(labels, int)
    sp = scores[labels == 1]
    sn = scores[labels == 0]
    wins = (sp[:, None] > sn[None, :]).sum()
    ties = (sp[:, None] == sn[None, :]).sum()
    return (wins + 0.5 * ties) / (sp.size * sn.size)


class TestDice:
    def test_identical_masks(self, rng):
        m = mask(rng.random((8, 8)) > 0.6)
        assert dice(m, m) == 1.0

    def test_disjoint_masks(self):
        a = mask([[1, 1, 0, 0]])
        b = mask([[0, 0, 1, 1]])
        assert dice(a, b) == 0.0

    def test_half_overlap(self):
        a = mask([[1, 1, 0]])
        b = mask([[0, 1, 1]])
        assert dice(a, b) == 0.5

    def test_both_empty_is_one(self):
        assert dice(mask(np.zeros((4, 4))), mask(np.zeros((4, 4)))) == 1.0

    def test_symmetry(self, rng):
        a = mask(rng.random((6, 6)) > 0.5)
        b = mask(rng.random((6, 6)) > 0.5)
        assert dice(a, b) == dice(b, a)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            dice(mask(np.zeros((2, 2))), mask(np.zeros((2, 3))))

    def test_nonbinary_rejected(self):
        with pytest.raises(ValueError, match="0/1"):
            dice(np.full((2, 2), 2), mask(np.zeros((2, 2))))


class TestRocCurve:
    def test_perfect_separation_passes_through_corner(self):
        scores = [0.9] * 5 + [0.1] * 5
        labels = [1] * 5 + [0] * 5
        pts = roc_curve(scores, labels)
        assert (0.0, 1.0) in [(p.fpr, p.tpr) for p in pts]

    def test_all_equal_scores_two_sentinels(self):
        pts = roc_curve([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0])
        assert len(pts) == 2
        assert (pts[0].fpr, pts[0].tpr) == (0.0, 0.0)
        assert (pts[1].fpr, pts[1].tpr) == (1.0, 1.0)

    def test_three_scores_match_enumeration_oracle(self):
        scores = [0.8, 0.6, 0.4]
        labels = [1, 0, 1]
        got = [(p.fpr, p.tpr, p.threshold) for p in roc_curve(scores, labels)]
        assert got == roc_oracle(scores, labels)

    def test_random_instances_match_enumeration_oracle(self, rng):
        for _ in range(20):
            n = int(rng.integers(4, 60))
            scores = rng.choice([0.1, 0.25, 0.5, 0.7, 0.9], size=n)  # forces ties
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            got = [(p.fpr, p.tpr, p.threshold) for p in roc_curve(scores, labels)]
            want = roc_oracle(scores, labels)
            assert len(got) == len(want)
            for g, w in zip(got, want):
                assert g[2] == w[2]
                assert abs(g[0] - w[0]) < 1e-12 and abs(g[1] - w[1]) < 1e-12

    def test_endpoints_and_monotonicity(self, rng):
        scores = rng.random(50)
        labels = rng.integers(0, 2, size=50)
        labels[0], labels[1] = 0, 1
        pts = roc_curve(scores, labels)
        assert (pts[0].fpr, pts[0].tpr) == (0.0, 0.0)
        assert (pts[-1].fpr, pts[-1].tpr) == (1.0, 1.0)
        fpr = [p.fpr for p in pts]
        tpr = [p.tpr for p in pts]
        assert all(b >= a for a, b in zip(fpr, fpr[1:]))
        assert all(b >= a for a, b in zip(tpr, tpr[1:]))

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="single class"):
            roc_curve([0.2, 0.7], [1, 1])


class TestAuc:
    def test_perfect_separation(self):
        pts = roc_curve([0.9, 0.9, 0.1], [1, 1, 0])
        assert auc(pts) == 1.0

    def test_all_equal_is_half(self):
        pts = roc_curve([0.3] * 6, [1, 0, 1, 0, 1, 0])
        assert auc(pts) == 0.5

    def test_matches_pairwise_oracle(self, rng):
        scores = rng.choice(np.round(rng.random(30), 2), size=50)
        labels = rng.integers(0, 2, size=50)
        labels[:2] = [0, 1]
        assert abs(auc(roc_curve(scores, labels))
                   - auc_pairwise_oracle(scores, labels)) < 1e-9

    def test_invariant_under_monotone_transform(self, rng):
        scores = rng.random(80)
        labels = rng.integers(0, 2, size=80)
        labels[:2] = [0, 1]
        a1 = auc(roc_curve(scores, labels))
        a2 = auc(roc_curve(np.exp(3 * scores) + 7, labels))
        assert abs(a1 - a2) < 1e-12


class TestEvalReport:
    def make_report(self):
        scores = np.array([0.9, 0.8, 0.3, 0.2])
        labels = np.array([1, 1, 0, 0])
        return build_report(["0", "1"], [0.75, 0.5], scores, labels, (2, 0, 2, 0))

    def test_fields(self):
        rep = self.make_report()
        assert rep.mean_dice == 0.625
        assert rep.auc == 1.0
        assert (rep.tp, rep.fp, rep.tn, rep.fn) == (2, 0, 2, 0)
        assert rep.roc_points()[0] == RocPoint(0.0, 0.0, np.inf)

    def test_csv_output(self, tmp_path):
        rep = self.make_report()
        rep.write_csvs(str(tmp_path))
        dice_csv = (tmp_path / "dice.csv").read_text()
        assert dice_csv.splitlines()[0] == "image_id,dice"
        assert "0,0.75" in dice_csv
        roc_csv = (tmp_path / "roc.csv").read_text().splitlines()
        assert roc_csv[0] == "threshold,fpr,tpr"
        assert len(roc_csv) == 1 + len(rep.thresholds)
        summary = (tmp_path / "summary.csv").read_text().splitlines()
        assert summary[0] == "mean_dice,auc"
        assert summary[1] == "0.625,1.0"
        # LF endings only
        raw = (tmp_path / "roc.csv").read_bytes()
        assert b"\r" not in raw

    def test_oracle_predictor_scores_perfectly(self, rng):
        truth = (rng.random((16, 16)) > 0.5).astype(np.uint8)
        scores = truth.ravel().astype(float)
        rep = build_report(["0"], [dice(truth, truth)], scores, truth.ravel(),
                           confusion(truth, truth))
        assert rep.mean_dice == 1.0
        assert rep.auc == 1.0

    def test_constant_half_probability_gives_half_auc(self, rng):
        truth = (rng.random((16, 16)) > 0.5).astype(np.uint8)
        scores = np.full(truth.size, 0.5)
        pred = (scores.reshape(truth.shape) >= 0.5).astype(np.uint8)
        rep = build_report(["0"], [dice(pred, truth)], scores, truth.ravel(),
                           confusion(pred, truth))
        assert rep.auc == 0.5
