"""Dataset generation on disk, manifests, a priori masks, per-sequence features."""

import numpy as np
import pytest

from irzone import io_formats as io
from irzone.features import FEATURE_DIM
from irzone.phantom import default_config_sampler, generate_phantom
from irzone.pipeline import (
    ManifestEntry,
    auto_zpr,
    make_dataset,
    preprocess_sequence,
    read_manifest,
    zpr_from_reference,
)
from irzone.zones import LEAF_LABELS, Mode, ZoneLabel

from conftest import small_config


def tiny_sampler(mode):
    return default_config_sampler(mode, width=48, height=36, n_frames=12, nwa_margin=6)


class TestMakeDataset:
    def test_zero_sequences_gives_empty_manifest_and_no_files(self, tmp_path):
        entries = make_dataset(tmp_path, n_sequences=0)
        assert entries == []
        assert (tmp_path / "manifest.txt").read_text() == ""
        assert not list(tmp_path.glob("*.irts"))

    def test_manifest_counts_match_recount_from_mask_files(self, tmp_path):
        entries = make_dataset(tmp_path, n_sequences=2,
                               config_sampler=tiny_sampler(Mode.ON), seed=1)
        assert len(entries) == 2
        for e in entries:
            mask, _ = io.read_mask(e.mask_path)
            recount = {
                l.name: int(np.count_nonzero(mask.labels == int(l))) for l in LEAF_LABELS
            }
            assert e.class_counts == recount

    def test_mode_mix_produces_requested_composition(self, tmp_path):
        mix = {"On": 2, "In": 2, "Off": 1}
        all_entries = []
        for mode_name, count in mix.items():
            sub = make_dataset(tmp_path / mode_name.lower(), mode_mix={mode_name: count},
                               config_sampler=tiny_sampler(Mode.parse(mode_name)), seed=2)
            all_entries.extend(sub)
        assert len(all_entries) == 5
        assert [e.mode.value for e in all_entries] == ["On", "On", "In", "In", "Off"]
        for e in all_entries:
            mask, mode = io.read_mask(e.mask_path)
            mask.check_mode(mode)

    def test_deterministic_for_fixed_seed(self, tmp_path):
        make_dataset(tmp_path / "a", n_sequences=1,
                     config_sampler=tiny_sampler(Mode.ON), seed=3)
        make_dataset(tmp_path / "b", n_sequences=1,
                     config_sampler=tiny_sampler(Mode.ON), seed=3)
        assert (tmp_path / "a/seq_0000.irts").read_bytes() == (
            tmp_path / "b/seq_0000.irts"
        ).read_bytes()

    def test_rejects_negative_counts(self, tmp_path):
        with pytest.raises(ValueError, match="nonnegative"):
            make_dataset(tmp_path, mode_mix={"On": -1})

    def test_manifest_line_round_trip(self):
        entry = ManifestEntry("a.irts", "a.pgm", Mode.IN,
                              {"NWA": 10, "NA_DM": 5, "HA_DM": 1, "NA_BC": 3, "HA_BC": 2})
        back = ManifestEntry.parse(entry.line())
        assert back == entry

    def test_read_manifest_skips_blank_lines(self, tmp_path):
        entries = make_dataset(tmp_path, n_sequences=1,
                               config_sampler=tiny_sampler(Mode.ON), seed=4)
        path = tmp_path / "manifest.txt"
        path.write_text(path.read_text() + "\n\n")
        assert read_manifest(path) == entries


class TestAprioriMasks:
    def test_auto_prior_has_border_band_and_tissue_interior(self):
        z = auto_zpr((20, 30), 250e-6, Mode.ON, margin=4)
        assert np.all(z.labels[:4, :] == int(ZoneLabel.NWA))
        assert z.labels[10, 15] == int(ZoneLabel.NA_DM)
        z.check_mode(Mode.ON)

    def test_auto_prior_uses_cortex_layer_for_off_mode(self):
        z = auto_zpr((20, 30), 250e-6, Mode.OFF, margin=4)
        assert z.labels[10, 15] == int(ZoneLabel.NA_BC)
        z.check_mode(Mode.OFF)

    def test_reference_prior_erases_tumor_distinction_only(self):
        labels = np.array(
            [[0, int(ZoneLabel.NA_DM)], [int(ZoneLabel.HA_DM), int(ZoneLabel.HA_BC)]],
            dtype=np.uint8,
        )
        from irzone.zones import ZoneMask

        z = zpr_from_reference(ZoneMask(labels, 250e-6))
        assert z.labels[0, 0] == 0
        assert z.labels[0, 1] == int(ZoneLabel.NA_DM)
        assert z.labels[1, 0] == int(ZoneLabel.NA_DM)
        assert z.labels[1, 1] == int(ZoneLabel.NA_BC)


class TestPreprocessSequence:
    def test_feature_map_shape_and_validity(self):
        seq, _, _ = generate_phantom(small_config(noise_sigma=0.03), seed=5)
        sf = preprocess_sequence(seq)
        h, w = seq.frame_shape
        assert sf.features.shape == (h * w, FEATURE_DIM)
        assert sf.shape == (h, w)
        assert np.all(np.isfinite(sf.features))
        # a clean, still sequence should yield almost no degenerate pixels
        assert np.mean(sf.features[:, -1]) < 0.05
