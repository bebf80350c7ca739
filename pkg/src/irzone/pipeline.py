"""End-to-end orchestration: dataset generation on disk, per-sequence
preprocessing into feature maps, cascade training from a manifest, and
inference to a final zone mask."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io_formats as io
from .features import extract_features_batch
from .models.cascade import CascadeConfig, CascadeModel, cascade_predict, cascade_train
from .phantom import PhantomConfig, ThermalSequence, generate_phantom
from .postprocess import (
    DecisionThresholds,
    fit_thresholds,
    lps_decide,
    probabilistic_filter,
    topological_filter,
)
from .preprocess import (
    fit_recovery_batch,
    register_sequence,
    remove_damaged_frames,
)
from .zones import HA_LEAVES, LEAF_LABELS, Mode, ZoneLabel, ZoneMask


@dataclass
class ManifestEntry:
    seq_path: str
    mask_path: str
    mode: Mode
    class_counts: dict[str, int]

    def line(self) -> str:
        counts = " ".join(f"{k} {v}" for k, v in sorted(self.class_counts.items()))
        return f"{self.seq_path}\t{self.mask_path}\t{self.mode.value}\t{counts}"

    @classmethod
    def parse(cls, line: str) -> "ManifestEntry":
        seq_path, mask_path, mode, counts_str = line.rstrip("\n").split("\t")
        toks = counts_str.split()
        counts = {toks[i]: int(toks[i + 1]) for i in range(0, len(toks), 2)}
        return cls(seq_path, mask_path, Mode.parse(mode), counts)


def write_manifest(path, entries: list[ManifestEntry]):
    io._atomic_write(path, ("".join(e.line() + "\n" for e in entries)).encode())


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            entries.append(ManifestEntry.parse(line))
    return entries


def make_dataset(out_dir, n_sequences=None, mode_mix=None, config_sampler=None,
                 seed=0) -> list[ManifestEntry]:
    """Generate phantoms to disk plus a manifest of per-class pixel counts.

    Either `n_sequences` (all one mode via config_sampler) or `mode_mix`
    ({mode name: count}) must be given. Deterministic for a fixed seed.
    """
    from .phantom import default_config_sampler

    out_dir = Path(out_dir)
    if mode_mix is None:
        if n_sequences is None:
            raise ValueError("need n_sequences or mode_mix")
        mode_mix = {"On": int(n_sequences)}
    if any(v < 0 for v in mode_mix.values()):
        raise ValueError("mode counts must be nonnegative")

    rng = np.random.default_rng(seed)
    entries = []
    idx = 0
    for mode_name in ("On", "In", "Off"):
        count = int(mode_mix.get(mode_name, 0))
        if count == 0:
            continue
        mode = Mode.parse(mode_name)
        sampler = config_sampler or default_config_sampler(mode)
        for _ in range(count):
            config = sampler(rng)
            config.mode = mode
            seq_seed = int(rng.integers(0, 2**31 - 1))
            seq, mask, _ = generate_phantom(config, seq_seed)
            seq_path = out_dir / f"seq_{idx:04d}.irts"
            mask_path = out_dir / f"mask_{idx:04d}.pgm"
            try:
                io.write_sequence(seq_path, seq)
                io.write_mask(mask_path, mask, mode)
            except OSError as e:
                raise OSError(f"failed writing {seq_path}: {e}") from e
            entries.append(
                ManifestEntry(str(seq_path), str(mask_path), mode, mask.class_counts())
            )
            idx += 1
    write_manifest(out_dir / "manifest.txt", entries)
    return entries


@dataclass
class SequenceFeatures:
    """Per-pixel feature map for one preprocessed sequence."""

    features: np.ndarray   # [H*W, D]
    shape: tuple[int, int]
    pixel_size: float
    valid_mask: np.ndarray
    report: object


# preprocessing is deterministic per file; training, calibration, and
# inference all need the same features, so cache by path
_FEATURE_CACHE: dict[str, SequenceFeatures] = {}


def load_features(seq_path) -> SequenceFeatures:
    key = str(Path(seq_path).resolve())
    if key not in _FEATURE_CACHE:
        if len(_FEATURE_CACHE) > 256:
            _FEATURE_CACHE.clear()
        _FEATURE_CACHE[key] = preprocess_sequence(io.read_sequence(seq_path))
    return _FEATURE_CACHE[key]


def preprocess_sequence(seq: ThermalSequence, max_shift=5) -> SequenceFeatures:
    """EDR + RDF + per-pixel fit + feature extraction for one sequence."""
    registered, rep = register_sequence(seq, max_shift=max_shift)
    cleaned, rep = remove_damaged_frames(registered, rep)
    h, w = cleaned.frame_shape
    series = cleaned.data.reshape(cleaned.n_frames, -1).T.astype(np.float64)  # [N, T]
    fits = fit_recovery_batch(series, cleaned.timestamps)
    valid = rep.valid_mask if rep.valid_mask is not None else np.ones((h, w), dtype=bool)
    # pixels exposed by registration carry no trustworthy dynamics
    fits["degenerate"] = fits["degenerate"] | ~valid.ravel()
    feats = extract_features_batch(fits, series, cleaned.timestamps)
    feats[~valid.ravel(), : feats.shape[1] - 1] = 0.0
    feats[~valid.ravel(), -1] = 1.0
    return SequenceFeatures(
        features=feats, shape=(h, w), pixel_size=seq.pixel_size,
        valid_mask=valid, report=rep,
    )


def train_from_manifest(manifest_path, mode: Mode, config: CascadeConfig,
                        seed: int = 0, max_pixels_per_seq: int = 0) -> CascadeModel:
    """Pool features and ground-truth labels over the manifest and train."""
    entries = [e for e in read_manifest(manifest_path) if e.mode is mode]
    if not entries:
        raise ValueError(f"manifest has no {mode.value}-mode sequences")
    feats = []
    labels = []
    rng = np.random.default_rng(seed)
    for e in entries:
        mask, _ = io.read_mask(e.mask_path)
        sf = load_features(e.seq_path)
        x = sf.features
        y = mask.labels.ravel()
        if max_pixels_per_seq and len(y) > max_pixels_per_seq:
            pick = rng.choice(len(y), size=max_pixels_per_seq, replace=False)
            x, y = x[pick], y[pick]
        feats.append(x)
        labels.append(y)
    X = np.concatenate(feats, axis=0)
    y = np.concatenate(labels, axis=0)
    return cascade_train(X, y, mode, config, seed=seed)


def auto_zpr(shape, pixel_size, mode: Mode, margin: int = 16) -> ZoneMask:
    """Trivial a priori mask: NWA border band, single tissue layer inside."""
    h, w = shape
    labels = np.zeros((h, w), dtype=np.uint8)
    inner = ZoneLabel.NA_BC if mode is Mode.OFF else ZoneLabel.NA_DM
    labels[margin : h - margin, margin : w - margin] = int(inner)
    return ZoneMask(labels, pixel_size)


def zpr_from_reference(mask: ZoneMask) -> ZoneMask:
    """A priori mask from a reference delineation: keeps the WA/NWA and BC/DM
    splits, erases the NA/HA distinction (that is the classifier's job)."""
    labels = mask.labels.copy()
    labels[labels == int(ZoneLabel.HA_DM)] = int(ZoneLabel.NA_DM)
    labels[labels == int(ZoneLabel.HA_BC)] = int(ZoneLabel.NA_BC)
    return ZoneMask(labels, mask.pixel_size)


@dataclass
class InferenceResult:
    z_ps: ZoneMask
    prob_maps: dict
    thresholds: DecisionThresholds
    tf_report: object
    preprocess_report: object


def infer_sequence(model: CascadeModel, seq: ThermalSequence, z_pr: ZoneMask,
                   thresholds: DecisionThresholds, pf_radius: int = 1,
                   min_area_mm2: float = 2.0, connectivity: int = 8,
                   features: SequenceFeatures | None = None) -> InferenceResult:
    """Full per-sequence inference: features -> cascade -> PF -> LPS -> TF."""
    sf = features if features is not None else preprocess_sequence(seq)
    probs = cascade_predict(model, sf.features)
    h, w = sf.shape
    maps = {l: probs[l].reshape(h, w) for l in LEAF_LABELS}
    smoothed = probabilistic_filter(maps, radius=pf_radius)
    z_ps = lps_decide(smoothed, z_pr, model.mode, thresholds)
    filtered, tf_report = topological_filter(
        z_ps.labels, z_ps.pixel_size, min_area_mm2=min_area_mm2,
        connectivity=connectivity,
    )
    z_final = ZoneMask(filtered, z_ps.pixel_size)
    z_final.check_mode(model.mode)
    return InferenceResult(
        z_ps=z_final, prob_maps=smoothed, thresholds=thresholds,
        tf_report=tf_report, preprocess_report=sf.report,
    )


@dataclass
class E2EConfig:
    n_train: int = 8
    n_test: int = 4
    mode: Mode = Mode.ON
    width: int = 96
    height: int = 72
    n_frames: int = 40
    nwa_margin: int = 10
    noise_sigma: float = 0.03
    alpha: float = 0.05
    beta: float = 0.05
    backends: tuple[str, ...] = ("rf", "sdae")
    recovery: dict | None = None  # None: phantom defaults
    rf_trees: int = 30
    max_train_pixels: int = 8000
    pixels_per_seq: int = 6000
    pf_radius: int = 1
    min_area_mm2: float = 2.0


def run_e2e(out_dir, seed: int, config: E2EConfig = E2EConfig()) -> dict:
    """Full pipeline: generate train/test phantoms, train every backend,
    calibrate thresholds, infer the test set, and write a quality report.

    Everything on disk (datasets, models, predicted masks, report) is a pure
    function of (seed, config)."""
    from .evaluation import report as make_report
    from .models.rf import RFConfig
    from .phantom import default_config_sampler

    out_dir = Path(out_dir)
    sampler = default_config_sampler(
        config.mode, recovery=config.recovery, width=config.width,
        height=config.height, n_frames=config.n_frames,
        noise_sigma=config.noise_sigma, nwa_margin=config.nwa_margin,
    )
    make_dataset(out_dir / "train", mode_mix={config.mode.value: config.n_train},
                 config_sampler=sampler, seed=seed)
    make_dataset(out_dir / "test", mode_mix={config.mode.value: config.n_test},
                 config_sampler=sampler, seed=seed + 1)
    train_manifest = out_dir / "train" / "manifest.txt"
    test_entries = read_manifest(out_dir / "test" / "manifest.txt")

    results = {}
    models = {}
    for backend in config.backends:
        cconfig = CascadeConfig(
            backend=backend,
            rf=RFConfig(n_trees=config.rf_trees),
            max_train_pixels=config.max_train_pixels,
        )
        model = train_from_manifest(train_manifest, config.mode, cconfig,
                                    seed=seed, max_pixels_per_seq=config.pixels_per_seq)
        io.write_model(out_dir / f"model_{backend}.izm", model,
                       header_extra={"mode": config.mode.value, "seed": seed})
        thresholds = calibrate_thresholds(model, train_manifest,
                                          config.alpha, config.beta, seed=seed,
                                          pf_radius=config.pf_radius)
        items = []
        for i, e in enumerate(test_entries):
            ref, _ = io.read_mask(e.mask_path)
            z_pr = zpr_from_reference(ref)
            res = infer_sequence(model, None, z_pr, thresholds,
                                 pf_radius=config.pf_radius,
                                 min_area_mm2=config.min_area_mm2,
                                 features=load_features(e.seq_path))
            io.write_mask(out_dir / f"pred_{backend}_{i:04d}.pgm", res.z_ps, config.mode)
            items.append((f"seq_{i:04d}", res.z_ps, ref))
        results[backend.upper()] = items
        models[backend] = model

    text = make_report(results)
    io._atomic_write(out_dir / "report.txt", text.encode())
    return {"report": text, "results": results, "models": models}


def calibrate_thresholds(model: CascadeModel, manifest_path, alpha: float,
                         beta: float, max_pixels_per_seq: int = 4000,
                         seed: int = 0, pf_radius: int = 1) -> DecisionThresholds:
    """Fit the HA decision threshold on labeled calibration sequences.

    Probabilities are smoothed exactly as at decision time, otherwise the
    fitted threshold is calibrated against a different distribution than the
    one it will cut."""
    entries = [e for e in read_manifest(manifest_path) if e.mode is model.mode]
    p_all, ha_all = [], []
    rng = np.random.default_rng(seed)
    for e in entries:
        mask, _ = io.read_mask(e.mask_path)
        sf = load_features(e.seq_path)
        probs = cascade_predict(model, sf.features)
        h, w = sf.shape
        maps = {l: probs[l].reshape(h, w) for l in LEAF_LABELS}
        smoothed = probabilistic_filter(maps, radius=pf_radius)
        p_ha = sum(smoothed[l] for l in HA_LEAVES).ravel()
        wa = mask.wa.ravel()
        p = p_ha[wa]
        is_ha = mask.ha.ravel()[wa]
        if max_pixels_per_seq and len(p) > max_pixels_per_seq:
            pick = rng.choice(len(p), size=max_pixels_per_seq, replace=False)
            p, is_ha = p[pick], is_ha[pick]
        p_all.append(p)
        ha_all.append(is_ha)
    return fit_thresholds(np.concatenate(p_all), np.concatenate(ha_all), alpha, beta)
