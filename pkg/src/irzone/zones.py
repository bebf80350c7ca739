"""Zone taxonomy: leaf labels, derived unions, and per-mode legality."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np


class ZoneLabel(IntEnum):
    """Leaf zone labels. Values double as PGM gray codes in mask files."""

    NWA = 0      # non-working area (skull, drapes, out of field)
    NA_DM = 50   # intact dura mater
    HA_DM = 100  # tumor projection on dura mater
    NA_BC = 150  # intact exposed cortex
    HA_BC = 200  # tumor projection on exposed cortex


LEAF_LABELS = (
    ZoneLabel.NWA,
    ZoneLabel.NA_DM,
    ZoneLabel.HA_DM,
    ZoneLabel.NA_BC,
    ZoneLabel.HA_BC,
)

HA_LEAVES = (ZoneLabel.HA_DM, ZoneLabel.HA_BC)
NA_LEAVES = (ZoneLabel.NA_DM, ZoneLabel.NA_BC)
DM_LEAVES = (ZoneLabel.NA_DM, ZoneLabel.HA_DM)
BC_LEAVES = (ZoneLabel.NA_BC, ZoneLabel.HA_BC)


class Mode(Enum):
    """Acquisition mode: which tissue layers can appear in frame."""

    ON = "On"    # dura mater only, cortex not exposed
    IN = "In"    # both dura mater and exposed cortex
    OFF = "Off"  # exposed cortex only

    @property
    def legal_leaves(self) -> frozenset[ZoneLabel]:
        return _LEGAL[self]

    @classmethod
    def parse(cls, text: str) -> "Mode":
        for m in cls:
            if m.value.lower() == text.strip().lower():
                return m
        raise ValueError(f"unknown mode {text!r}; expected one of On, In, Off")


_LEGAL = {
    Mode.ON: frozenset({ZoneLabel.NWA, ZoneLabel.NA_DM, ZoneLabel.HA_DM}),
    Mode.IN: frozenset(LEAF_LABELS),
    Mode.OFF: frozenset({ZoneLabel.NWA, ZoneLabel.NA_BC, ZoneLabel.HA_BC}),
}


@dataclass
class ZoneMask:
    """Per-pixel leaf labels plus physical pixel size.

    `labels` is a uint8 [H, W] array of ZoneLabel codes.
    """

    labels: np.ndarray
    pixel_size: float  # meters

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.labels.ndim != 2:
            raise ValueError("labels must be 2D")
        codes = set(np.unique(self.labels).tolist())
        bad = codes - {int(l) for l in LEAF_LABELS}
        if bad:
            raise ValueError(f"undefined label codes {sorted(bad)}")
        if self.pixel_size <= 0:
            raise ValueError("pixel_size must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def is_label(self, label: ZoneLabel) -> np.ndarray:
        return self.labels == int(label)

    def union(self, leaves) -> np.ndarray:
        out = np.zeros(self.labels.shape, dtype=bool)
        for l in leaves:
            out |= self.labels == int(l)
        return out

    @property
    def wa(self) -> np.ndarray:
        return self.labels != int(ZoneLabel.NWA)

    @property
    def nwa(self) -> np.ndarray:
        return self.labels == int(ZoneLabel.NWA)

    @property
    def na(self) -> np.ndarray:
        return self.union(NA_LEAVES)

    @property
    def ha(self) -> np.ndarray:
        return self.union(HA_LEAVES)

    @property
    def dm(self) -> np.ndarray:
        return self.union(DM_LEAVES)

    @property
    def bc(self) -> np.ndarray:
        return self.union(BC_LEAVES)

    def class_counts(self) -> dict[str, int]:
        return {l.name: int(np.count_nonzero(self.labels == int(l))) for l in LEAF_LABELS}

    def check_mode(self, mode: Mode) -> None:
        present = {ZoneLabel(int(c)) for c in np.unique(self.labels)}
        illegal = present - mode.legal_leaves
        if illegal:
            names = sorted(l.name for l in illegal)
            raise ValueError(f"labels {names} illegal in mode {mode.value}")
