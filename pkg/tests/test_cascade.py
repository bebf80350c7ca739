"""Binary-classifier cascade: stage wiring, product rule, legality."""

import numpy as np
import pytest

from irzone.features import FEATURE_DIM, Standardizer
from irzone.models.cascade import (
    CascadeConfig,
    CascadeModel,
    cascade_predict,
    cascade_train,
    prob_matrix,
    stage_targets,
    stages_for_mode,
)
from irzone.models.rf import RFConfig, RFModel, Tree
from irzone.zones import LEAF_LABELS, Mode, ZoneLabel


def synthetic_dataset(mode: Mode, n_per_class=150, seed=0):
    """Feature clusters separable by label, restricted to the mode's leaves."""
    rng = np.random.default_rng(seed)
    leaves = sorted(mode.legal_leaves, key=int)
    xs, ys = [], []
    for i, leaf in enumerate(leaves):
        x = rng.normal(loc=3.0 * i, scale=0.3, size=(n_per_class, FEATURE_DIM))
        x[:, -1] = 0.0  # all pixels carry usable dynamics
        xs.append(x)
        ys.append(np.full(n_per_class, int(leaf), dtype=np.uint8))
    return np.concatenate(xs), np.concatenate(ys)


def constant_forest(p: float) -> RFModel:
    """Single-leaf forest that outputs a fixed class-1 probability."""
    leaf = Tree(
        feature=np.array([-1]),
        threshold=np.array([0.0]),
        left=np.array([-1]),
        right=np.array([-1]),
        leaf_frac=np.array([p]),
    )
    return RFModel(config=RFConfig(n_trees=1), trees=[leaf], n_features=FEATURE_DIM, seed=0)


def identity_standardizer() -> Standardizer:
    return Standardizer(mean=np.zeros(FEATURE_DIM), scale=np.ones(FEATURE_DIM))


FAST_RF = CascadeConfig(backend="rf", rf=RFConfig(n_trees=5, min_leaf=2))


class TestStageWiring:
    def test_on_mode_trains_wa_and_dura_stages_only(self):
        x, y = synthetic_dataset(Mode.ON)
        model = cascade_train(x, y, Mode.ON, FAST_RF)
        assert set(model.stages) == {"C1", "C4"}

    def test_off_mode_trains_wa_and_cortex_stages_only(self):
        x, y = synthetic_dataset(Mode.OFF)
        model = cascade_train(x, y, Mode.OFF, FAST_RF)
        assert set(model.stages) == {"C1", "C3"}

    def test_in_mode_trains_all_four_stages(self):
        x, y = synthetic_dataset(Mode.IN)
        model = cascade_train(x, y, Mode.IN, FAST_RF)
        assert set(model.stages) == {"C1", "C2", "C3", "C4"}

    def test_stages_for_mode_matches_trained_models(self):
        for mode in Mode:
            x, y = synthetic_dataset(mode)
            model = cascade_train(x, y, mode, FAST_RF)
            assert set(model.stages) == set(stages_for_mode(mode))

    def test_stage_targets_route_by_taxonomy(self):
        labels = np.array([0, 50, 100, 150, 200], dtype=np.uint8)
        routes = stage_targets(labels)
        np.testing.assert_array_equal(routes["C1"][1], [0, 1, 1, 1, 1])
        np.testing.assert_array_equal(routes["C2"][0], [False, True, True, True, True])
        np.testing.assert_array_equal(routes["C3"][0], [False, False, False, True, True])
        np.testing.assert_array_equal(routes["C4"][0], [False, True, True, False, False])


class TestTrainingErrors:
    def test_illegal_labels_rejected(self):
        x, y = synthetic_dataset(Mode.IN)
        with pytest.raises(ValueError, match="illegal in mode On"):
            cascade_train(x, y, Mode.ON, FAST_RF)

    def test_insufficient_per_class_samples_reported_with_counts(self):
        x, y = synthetic_dataset(Mode.ON, n_per_class=20)
        with pytest.raises(ValueError, match="insufficient samples per class"):
            cascade_train(x, y, Mode.ON, FAST_RF)

    def test_unknown_backend_rejected(self):
        x, y = synthetic_dataset(Mode.ON)
        with pytest.raises(ValueError, match="unknown backend"):
            cascade_train(x, y, Mode.ON, CascadeConfig(backend="svm"))

    def test_wrong_feature_dimension_rejected(self):
        with pytest.raises(ValueError, match="features must be"):
            cascade_train(np.zeros((10, 3)), np.zeros(10, dtype=np.uint8), Mode.ON, FAST_RF)


class TestPredict:
    def test_product_rule_by_hand(self):
        # P(WA)=0.8, P(HA|DM)=0.5, dura-only mode forces P(DM|WA)=1
        model = CascadeModel(
            mode=Mode.ON,
            backend="rf",
            standardizer=identity_standardizer(),
            stages={"C1": constant_forest(0.8), "C4": constant_forest(0.5)},
        )
        x = np.zeros((1, FEATURE_DIM))
        probs = cascade_predict(model, x)
        assert probs[ZoneLabel.NWA][0] == pytest.approx(0.2)
        assert probs[ZoneLabel.NA_DM][0] == pytest.approx(0.4)
        assert probs[ZoneLabel.HA_DM][0] == pytest.approx(0.4)

    def test_degenerate_pixel_hard_assigned_nwa(self):
        x, y = synthetic_dataset(Mode.ON)
        model = cascade_train(x, y, Mode.ON, FAST_RF)
        probe = np.zeros((1, FEATURE_DIM))
        probe[0, -1] = 1.0  # degenerate sentinel
        probs = cascade_predict(model, probe)
        assert probs[ZoneLabel.NWA][0] == 1.0
        for leaf in LEAF_LABELS:
            if leaf is not ZoneLabel.NWA:
                assert probs[leaf][0] == 0.0

    def test_probabilities_sum_to_one(self):
        for mode in Mode:
            x, y = synthetic_dataset(mode, seed=3)
            model = cascade_train(x, y, mode, FAST_RF)
            probe = np.random.default_rng(4).normal(size=(200, FEATURE_DIM))
            probe[:, -1] = 0.0
            total = prob_matrix(cascade_predict(model, probe)).sum(axis=1)
            assert np.max(np.abs(total - 1.0)) < 1e-9

    def test_illegal_leaves_have_zero_probability(self):
        for mode in (Mode.ON, Mode.OFF):
            x, y = synthetic_dataset(mode, seed=5)
            model = cascade_train(x, y, mode, FAST_RF)
            probe = np.random.default_rng(6).normal(size=(100, FEATURE_DIM))
            probe[:, -1] = 0.0
            probs = cascade_predict(model, probe)
            for leaf in LEAF_LABELS:
                if leaf not in mode.legal_leaves:
                    assert np.all(probs[leaf] == 0.0)


class TestBackendSymmetry:
    def test_sdae_backend_is_drop_in(self):
        from irzone.models.sdae import SDAEConfig

        x, y = synthetic_dataset(Mode.ON, seed=7)
        config = CascadeConfig(
            backend="sdae",
            sdae=SDAEConfig(hidden_sizes=(8,), finetune_epochs=20),
        )
        model = cascade_train(x, y, Mode.ON, config)
        probe = x[::10]
        total = prob_matrix(cascade_predict(model, probe)).sum(axis=1)
        assert np.max(np.abs(total - 1.0)) < 1e-9


class TestPersistence:
    def test_state_round_trip_preserves_predictions(self):
        x, y = synthetic_dataset(Mode.IN, seed=8)
        model = cascade_train(x, y, Mode.IN, FAST_RF)
        restored = CascadeModel.from_state(model.to_state())
        probe = x[::5]
        p1 = prob_matrix(cascade_predict(model, probe))
        p2 = prob_matrix(cascade_predict(restored, probe))
        assert np.array_equal(p1, p2)
