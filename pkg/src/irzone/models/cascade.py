"""Cascade of binary classifiers over the zone taxonomy.

Wiring (one function, `stage_targets`, so it can be rewired):
  C1: WA vs NWA          on all usable pixels
  C2: DM vs BC           within WA (In mode only; On forces DM, Off forces BC)
  C3: HA vs NA           within BC
  C4: HA vs NA           within DM

Leaf probabilities are products of branch probabilities. Pixels without
usable dynamics (degenerate flag set) are hard-assigned NWA.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..features import FEATURE_DIM, Standardizer, fit_standardizer
from ..zones import LEAF_LABELS, Mode, ZoneLabel
from .rf import RFConfig, RFModel, rf_predict_proba, train_rf
from .sdae import SDAEConfig, SDAEModel, train_sdae

MIN_SAMPLES_PER_CLASS = 100

STAGE_NAMES = ("C1", "C2", "C3", "C4")


def stages_for_mode(mode: Mode) -> tuple[str, ...]:
    if mode is Mode.ON:
        return ("C1", "C4")
    if mode is Mode.OFF:
        return ("C1", "C3")
    return ("C1", "C2", "C3", "C4")


@dataclass(frozen=True)
class CascadeConfig:
    backend: str = "rf"  # "rf" | "sdae"
    rf: RFConfig = field(default_factory=RFConfig)
    sdae: SDAEConfig = field(default_factory=SDAEConfig)
    max_train_pixels: int = 20_000  # per-stage subsample cap
    min_samples_per_class: int = MIN_SAMPLES_PER_CLASS


@dataclass
class CascadeModel:
    mode: Mode
    backend: str
    standardizer: Standardizer
    stages: dict  # stage name -> RFModel | SDAEModel
    seed: int = 0

    def stage_proba(self, name: str, Xs: np.ndarray) -> np.ndarray:
        model = self.stages[name]
        if isinstance(model, RFModel):
            return rf_predict_proba(model, Xs)
        return model.predict_proba(Xs)

    def to_state(self) -> dict:
        return {
            "kind": "cascade",
            "mode": self.mode.value,
            "backend": self.backend,
            "seed": self.seed,
            "standardizer": self.standardizer.to_state(),
            "stages": {name: m.to_state() for name, m in self.stages.items()},
        }

    @classmethod
    def from_state(cls, state: dict) -> "CascadeModel":
        stages = {}
        for name, s in state["stages"].items():
            stages[name] = RFModel.from_state(s) if s["kind"] == "rf" else SDAEModel.from_state(s)
        return cls(
            mode=Mode.parse(state["mode"]),
            backend=str(state["backend"]),
            standardizer=Standardizer.from_state(state["standardizer"]),
            stages=stages,
            seed=int(state["seed"]),
        )


def stage_targets(labels: np.ndarray):
    """Ground-truth routing: stage -> (selector, binary target) over pixels."""
    labels = np.asarray(labels)
    is_nwa = labels == int(ZoneLabel.NWA)
    is_dm = np.isin(labels, [int(ZoneLabel.NA_DM), int(ZoneLabel.HA_DM)])
    is_bc = np.isin(labels, [int(ZoneLabel.NA_BC), int(ZoneLabel.HA_BC)])
    is_ha = np.isin(labels, [int(ZoneLabel.HA_DM), int(ZoneLabel.HA_BC)])
    all_px = np.ones(labels.shape, dtype=bool)
    return {
        "C1": (all_px, (~is_nwa).astype(np.int64)),
        "C2": (~is_nwa, is_dm.astype(np.int64)),
        "C3": (is_bc, is_ha.astype(np.int64)),
        "C4": (is_dm, is_ha.astype(np.int64)),
    }


def _subsample(Xs, y, cap, balanced, rng):
    """RF keeps the natural class mix; the SDAE trains on balanced classes
    (minibatch SGD under heavy imbalance starves the minority class)."""
    n = len(y)
    if balanced:
        idx0 = np.flatnonzero(y == 0)
        idx1 = np.flatnonzero(y == 1)
        per = min(len(idx0), len(idx1), cap // 2)
        pick = np.concatenate([
            rng.choice(idx0, size=per, replace=False),
            rng.choice(idx1, size=per, replace=False),
        ])
        pick = rng.permutation(pick)
        return Xs[pick], y[pick]
    if n <= cap:
        return Xs, y
    pick = rng.choice(n, size=cap, replace=False)
    return Xs[pick], y[pick]


def cascade_train(features, labels, mode: Mode,
                  config: CascadeConfig = CascadeConfig(), seed: int = 0) -> CascadeModel:
    """Train each stage on the pixels its parent would route to it (teacher
    forcing with ground-truth labels)."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[1] != FEATURE_DIM:
        raise ValueError(f"features must be [N, {FEATURE_DIM}]")
    if X.shape[0] != y.shape[0]:
        raise ValueError("features/labels length mismatch")
    present = {ZoneLabel(int(c)) for c in np.unique(y)}
    illegal = present - mode.legal_leaves
    if illegal:
        raise ValueError(f"labels {sorted(l.name for l in illegal)} illegal in mode {mode.value}")
    if config.backend not in ("rf", "sdae"):
        raise ValueError(f"unknown backend {config.backend!r}")

    usable = X[:, FEATURE_DIM - 1] < 0.5  # degenerate pixels are hard-ruled NWA
    std = fit_standardizer(X[usable]) if usable.any() else fit_standardizer(X)
    rng = np.random.default_rng(seed)

    stages = {}
    counts = {}
    for si, name in enumerate(stages_for_mode(mode)):
        sel, target = stage_targets(y)[name]
        sel = sel & usable
        ys = target[sel]
        n0 = int(np.count_nonzero(ys == 0))
        n1 = int(np.count_nonzero(ys == 1))
        counts[name] = (n0, n1)
        if min(n0, n1) < config.min_samples_per_class:
            raise ValueError(
                f"stage {name}: insufficient samples per class {counts}; "
                f"need >= {config.min_samples_per_class}"
            )
        Xs = std.apply(X[sel])
        Xs, ys = _subsample(Xs, ys, config.max_train_pixels,
                            balanced=(config.backend == "sdae"), rng=rng)
        stage_seed = seed + 7919 * (si + 1)
        if config.backend == "rf":
            stages[name] = train_rf(Xs, ys, config.rf, seed=stage_seed)
        else:
            stages[name] = train_sdae(Xs, ys, config.sdae, seed=stage_seed)
    return CascadeModel(mode=mode, backend=config.backend, standardizer=std,
                        stages=stages, seed=seed)


def cascade_predict(model: CascadeModel, features) -> dict[ZoneLabel, np.ndarray]:
    """Per-pixel probabilities over the mode's legal leaves (others zero).

    Probabilities over the legal set sum to 1. Leaf probability is the product
    of the branch probabilities along the cascade path.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != FEATURE_DIM:
        raise ValueError(f"features must be [N, {FEATURE_DIM}]")
    n = X.shape[0]
    mode = model.mode
    degen = X[:, FEATURE_DIM - 1] >= 0.5
    usable = ~degen
    Xs = model.standardizer.apply(X[usable])

    def proba(name):
        out = np.zeros(n)
        if usable.any() and name in model.stages:
            out[usable] = model.stage_proba(name, Xs)
        return out

    p_wa = proba("C1")
    if mode is Mode.ON:
        p_dm = np.ones(n)
    elif mode is Mode.OFF:
        p_dm = np.zeros(n)
    else:
        p_dm = proba("C2")
    p_ha_bc = proba("C3") if "C3" in model.stages else np.zeros(n)
    p_ha_dm = proba("C4") if "C4" in model.stages else np.zeros(n)

    probs = {
        ZoneLabel.NWA: 1.0 - p_wa,
        ZoneLabel.NA_BC: p_wa * (1 - p_dm) * (1 - p_ha_bc),
        ZoneLabel.HA_BC: p_wa * (1 - p_dm) * p_ha_bc,
        ZoneLabel.NA_DM: p_wa * p_dm * (1 - p_ha_dm),
        ZoneLabel.HA_DM: p_wa * p_dm * p_ha_dm,
    }
    for label in LEAF_LABELS:
        if label not in mode.legal_leaves:
            probs[label] = np.zeros(n)
    # degenerate pixels carry no diagnostic dynamics: hard NWA
    for label in LEAF_LABELS:
        probs[label][degen] = 1.0 if label is ZoneLabel.NWA else 0.0
    return probs


def prob_matrix(probs: dict[ZoneLabel, np.ndarray]) -> np.ndarray:
    """[N, 5] in LEAF_LABELS order."""
    return np.stack([probs[l] for l in LEAF_LABELS], axis=1)
