"""Confusion counts, sensitivities, balanced accuracy, exact binomial CIs."""

import numpy as np
import pytest

from irzone.evaluation import (
    ConfusionMatrix,
    accuracy_ci,
    balanced_accuracy,
    confusion,
    confusion_masks,
    group_labels,
    report,
    report_kv,
    sensitivity,
    table_row,
)
from irzone.zones import ZoneLabel, ZoneMask

NA = int(ZoneLabel.NA_DM)
HA = int(ZoneLabel.HA_DM)


class TestConfusion:
    def test_perfect_prediction_is_diagonal(self):
        labels = np.array([0, 1, 2, 1, 0])
        cm = confusion(labels, labels, (0, 1, 2))
        assert cm.correct == cm.total == 5
        assert np.all(cm.counts == np.diag(np.diag(cm.counts)))

    def test_hand_counted_two_pixel_example(self):
        ref = np.array([1, 2])   # groups: NA then HA
        pred = np.array([2, 2])
        cm = confusion(pred, ref, (0, 1, 2))
        assert cm.counts[1, 2] == 1  # NA predicted as HA
        assert cm.counts[2, 2] == 1  # HA predicted as HA

    def test_total_equals_pixel_count(self):
        rng = np.random.default_rng(0)
        pred = rng.integers(0, 3, size=100)
        ref = rng.integers(0, 3, size=100)
        assert confusion(pred, ref, (0, 1, 2)).total == 100

    def test_labels_outside_class_list_rejected(self):
        with pytest.raises(ValueError, match="outside class list"):
            confusion(np.array([0, 5]), np.array([0, 0]), (0, 1, 2))
        with pytest.raises(ValueError, match="outside class list"):
            confusion(np.array([0, 0]), np.array([0, 5]), (0, 1, 2))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            confusion(np.zeros(3), np.zeros(4), (0,))

    def test_merge_accumulates_counts(self):
        a = confusion(np.array([0, 1]), np.array([0, 1]), (0, 1))
        b = confusion(np.array([1, 1]), np.array([0, 1]), (0, 1))
        merged = a.merge(b)
        assert merged.total == 4
        assert merged.counts[0, 1] == 1

    def test_mask_confusion_groups_leaf_labels(self):
        pred = ZoneMask(np.array([[0, HA]], dtype=np.uint8), 250e-6)
        ref = ZoneMask(np.array([[0, int(ZoneLabel.HA_BC)]], dtype=np.uint8), 250e-6)
        cm = confusion_masks(pred, ref)
        assert cm.correct == 2  # HA_DM and HA_BC are the same HA group

    def test_group_labels_mapping(self):
        labels = np.array([0, 50, 100, 150, 200])
        np.testing.assert_array_equal(group_labels(labels), [0, 1, 2, 1, 2])


class TestSensitivity:
    def test_perfect_prediction_gives_one(self):
        cm = confusion(np.array([1, 1]), np.array([1, 1]), (0, 1))
        assert sensitivity(cm, 1) == 1.0

    def test_eight_of_ten_gives_point_eight(self):
        cm = ConfusionMatrix(classes=(0, 1), counts=np.array([[5, 0], [2, 8]]))
        assert sensitivity(cm, 1) == pytest.approx(0.8)

    def test_absent_class_reports_none_not_zero(self):
        cm = confusion(np.array([0, 0]), np.array([0, 0]), (0, 1))
        assert sensitivity(cm, 1) is None

    def test_agrees_with_brute_force_recount(self):
        rng = np.random.default_rng(1)
        pred = rng.integers(0, 3, size=200)
        ref = rng.integers(0, 3, size=200)
        cm = confusion(pred, ref, (0, 1, 2))
        for cls in (0, 1, 2):
            sel = ref == cls
            want = np.mean(pred[sel] == cls) if sel.any() else None
            got = sensitivity(cm, cls)
            assert got == pytest.approx(want) if want is not None else got is None


class TestBalancedAccuracy:
    def test_perfect_is_one(self):
        cm = confusion(np.array([0, 1]), np.array([0, 1]), (0, 1))
        assert balanced_accuracy(cm) == 1.0

    def test_hand_arithmetic_example(self):
        # class 0: 6 right / 10; class 1: 8 right / 10 -> mean 0.7
        cm = ConfusionMatrix(classes=(0, 1), counts=np.array([[6, 4], [2, 8]]))
        assert balanced_accuracy(cm) == pytest.approx(0.7)

    def test_empty_reference_class_rejected(self):
        cm = confusion(np.array([0, 0]), np.array([0, 0]), (0, 1))
        with pytest.raises(ValueError, match="absent"):
            balanced_accuracy(cm)


class TestAccuracyCI:
    def test_zero_successes_closed_form(self):
        lo, hi = accuracy_ci(0, 10)
        assert lo == 0.0
        assert hi == pytest.approx(1.0 - 0.025 ** (1 / 10), abs=1e-4)
        assert hi == pytest.approx(0.3085, abs=1e-4)

    def test_all_successes_closed_form(self):
        lo, hi = accuracy_ci(10, 10)
        assert hi == 1.0
        assert lo == pytest.approx(0.025 ** (1 / 10), abs=1e-4)
        assert lo == pytest.approx(0.6915, abs=1e-4)

    def test_half_successes_tabulated_value(self):
        lo, hi = accuracy_ci(5, 10)
        assert lo == pytest.approx(0.1871, abs=1e-3)
        assert hi == pytest.approx(0.8129, abs=1e-3)

    def test_interval_nesting_99_contains_95(self):
        for k, n in ((3, 17), (0, 9), (9, 9), (25, 50)):
            lo95, hi95 = accuracy_ci(k, n, level=0.95)
            lo99, hi99 = accuracy_ci(k, n, level=0.99)
            assert lo99 <= lo95 and hi95 <= hi99

    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError, match="positive"):
            accuracy_ci(0, 0)
        with pytest.raises(ValueError, match="out of range"):
            accuracy_ci(11, 10)


def perfect_results():
    labels = np.array([[0, NA], [HA, NA]], dtype=np.uint8)
    mask = ZoneMask(labels, 250e-6)
    return {"RF": [("seq_0000", mask, mask)], "SDAE": [("seq_0000", mask, mask)]}


class TestReport:
    def test_header_and_one_row_per_model(self):
        text = report(perfect_results())
        lines = text.splitlines()
        assert lines[0] == "Model  95% CI Ac         Sn NA   Sn HA   Sn NWA"
        assert lines[1].startswith("RF")
        assert lines[2].startswith("SDAE")

    def test_perfect_classifier_has_unit_sensitivities_and_ci_top(self):
        text = report(perfect_results())
        row = text.splitlines()[1]
        assert "1.0000)" in row       # CI upper bound
        assert row.count("1.0000") >= 4

    def test_report_is_deterministic(self):
        assert report(perfect_results()) == report(perfect_results())

    def test_per_sequence_balanced_accuracy_lines(self):
        text = report(perfect_results())
        assert "RF seq_0000 balanced_accuracy 100.00%" in text

    def test_key_value_report_fields(self):
        text = report_kv(perfect_results())
        for key in ("RF.ci_lo", "RF.sn_na", "SDAE.sn_ha", "SDAE.sn_nwa"):
            assert key in text

    def test_table_row_marks_absent_classes(self):
        cm = confusion(np.array([0, 0]), np.array([0, 0]), (0, 1, 2))
        assert "absent" in table_row("RF", cm)
