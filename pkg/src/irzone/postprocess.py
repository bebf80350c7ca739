"""Post-classification filtering: connected components, small-region
relabeling, probability smoothing, error-level thresholds, and the final
logical-and-probabilistic decision."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .zones import HA_LEAVES, LEAF_LABELS, Mode, ZoneLabel, ZoneMask

STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
STRUCTURE_8 = np.ones((3, 3), dtype=bool)

DEFAULT_MIN_AREA_MM2 = 2.0
DEFAULT_CONNECTIVITY = 8


@dataclass
class Component:
    label: int
    pixels: np.ndarray  # flat indices into the label map
    size: int


@dataclass
class ComponentReport:
    pixel_size: float
    entries: list[dict] = field(default_factory=list)  # label, count, area_mm2, action

    def lines(self) -> list[str]:
        out = []
        for e in self.entries:
            out.append(
                f"component label {e['label']} count {e['count']} "
                f"area_mm2 {e['area_mm2']:.6f} {e['action']}"
            )
        return out


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return STRUCTURE_4
    if connectivity == 8:
        return STRUCTURE_8
    raise ValueError("connectivity must be 4 or 8")


def connected_components(label_map, connectivity: int = DEFAULT_CONNECTIVITY) -> list[Component]:
    """Maximal same-label connected regions; every pixel in exactly one."""
    lm = np.asarray(label_map)
    if lm.ndim != 2:
        raise ValueError("label map must be 2D")
    struct = _structure(connectivity)
    comps = []
    for value in np.unique(lm):
        cc, n = ndimage.label(lm == value, structure=struct)
        for k in range(1, n + 1):
            flat = np.flatnonzero(cc.ravel() == k)
            comps.append(Component(label=int(value), pixels=flat, size=len(flat)))
    return comps


def _boundary_majority(lm, comp_mask, struct, total_counts):
    """Majority label among pixels adjacent to the component. Ties: the label
    covering more total frame area, then smallest label code."""
    dil = ndimage.binary_dilation(comp_mask, structure=struct) & ~comp_mask
    if not dil.any():
        return None
    vals, counts = np.unique(lm[dil], return_counts=True)
    best = None
    for v, c in zip(vals.tolist(), counts.tolist()):
        key = (c, total_counts.get(v, 0), -v)
        if best is None or key > best[0]:
            best = (key, v)
    return best[1]


def topological_filter(label_map, pixel_size, min_area_mm2=DEFAULT_MIN_AREA_MM2,
                       connectivity=DEFAULT_CONNECTIVITY, max_passes=10):
    """Relabel connected regions smaller than `min_area_mm2` to the majority
    label of their boundary neighbors; iterate until stable."""
    if min_area_mm2 < 0:
        raise ValueError("min_area_mm2 must be nonnegative")
    lm = np.asarray(label_map).copy()
    struct = _structure(connectivity)
    px_mm2 = (pixel_size * 1e3) ** 2
    report = ComponentReport(pixel_size=pixel_size)

    frame_area = lm.size * px_mm2
    if frame_area < min_area_mm2:
        report.entries.append({
            "label": -1, "count": lm.size, "area_mm2": frame_area,
            "action": "warning: whole frame below threshold, unchanged",
        })
        return lm, report

    for _ in range(max_passes):
        comps = connected_components(lm, connectivity)
        small = [c for c in comps if c.size * px_mm2 < min_area_mm2 and c.size < lm.size]
        if not small:
            break
        small.sort(key=lambda c: (c.size, int(c.pixels[0])))
        changed = False
        for c in small:
            mask = np.zeros(lm.shape, dtype=bool)
            mask.ravel()[c.pixels] = True
            # component membership may have changed earlier this pass
            if not np.all(lm[mask] == c.label):
                continue
            vals, counts = np.unique(lm, return_counts=True)
            totals = dict(zip(vals.tolist(), counts.tolist()))
            new = _boundary_majority(lm, mask, struct, totals)
            if new is None or new == c.label:
                continue
            lm[mask] = new
            changed = True
            report.entries.append({
                "label": c.label, "count": c.size,
                "area_mm2": c.size * px_mm2, "action": f"relabeled to {new}",
            })
        if not changed:
            break

    for c in connected_components(lm, connectivity):
        report.entries.append({
            "label": c.label, "count": c.size,
            "area_mm2": c.size * px_mm2, "action": "kept",
        })
    return lm, report


def probabilistic_filter(prob_maps: dict, radius: int) -> dict:
    """Per-class box mean over the (2r+1)^2 neighborhood with edge
    renormalization (in-frame neighbor count). Per-pixel sums are preserved."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if radius == 0:
        return {k: np.asarray(v, dtype=np.float64).copy() for k, v in prob_maps.items()}
    size = 2 * radius + 1
    any_map = next(iter(prob_maps.values()))
    ones = np.ones(np.asarray(any_map).shape, dtype=np.float64)
    norm = ndimage.uniform_filter(ones, size=size, mode="constant", cval=0.0)
    out = {}
    for k, v in prob_maps.items():
        v = np.asarray(v, dtype=np.float64)
        sm = ndimage.uniform_filter(v, size=size, mode="constant", cval=0.0)
        out[k] = sm / norm
    return out


@dataclass
class DecisionThresholds:
    alpha: float   # target HA false-positive rate
    beta: float    # target HA false-negative rate
    theta_ha: float
    achieved_alpha: float
    achieved_beta: float

    def lines(self) -> list[str]:
        return [
            f"alpha {self.alpha:.6f}",
            f"beta {self.beta:.6f}",
            f"theta_ha {self.theta_ha:.9f}",
            f"achieved_alpha {self.achieved_alpha:.6f}",
            f"achieved_beta {self.achieved_beta:.6f}",
        ]


def fit_thresholds(p_ha, is_ha, alpha, beta) -> DecisionThresholds:
    """Largest HA threshold whose calibration false-negative rate stays within
    `beta`; falls back to the FNR-minimizing threshold when none qualifies."""
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("alpha, beta must be in (0, 1)")
    p = np.asarray(p_ha, dtype=np.float64).ravel()
    ha = np.asarray(is_ha, dtype=bool).ravel()
    if not ha.any() or ha.all():
        raise ValueError("calibration set must contain both NA and HA pixels")
    cands = np.unique(p)
    best_theta = None
    for theta in cands[::-1]:  # largest first
        fnr = float(np.mean(p[ha] < theta))
        if fnr <= beta:
            best_theta = float(theta)
            break
    if best_theta is None:
        fnrs = [float(np.mean(p[ha] < th)) for th in cands]
        best_theta = float(cands[int(np.argmin(fnrs))])
    ach_beta = float(np.mean(p[ha] < best_theta))
    ach_alpha = float(np.mean(p[~ha] >= best_theta))
    return DecisionThresholds(alpha=alpha, beta=beta, theta_ha=best_theta,
                              achieved_alpha=ach_alpha, achieved_beta=ach_beta)


def lps_decide(prob_maps: dict, z_pr: ZoneMask, mode: Mode,
               thresholds: DecisionThresholds) -> ZoneMask:
    """Final decision: the a priori mask fixes NWA and the BC/DM split; within
    the remaining tissue a pixel is HA iff smoothed P(HA) >= theta."""
    z_pr.check_mode(mode)
    shape = z_pr.labels.shape
    for v in prob_maps.values():
        if np.asarray(v).shape != shape:
            raise ValueError("probability map shape mismatch")
    p_ha = sum(np.asarray(prob_maps[l], dtype=np.float64) for l in HA_LEAVES)
    is_ha = p_ha >= thresholds.theta_ha

    out = np.zeros(shape, dtype=np.uint8)  # NWA
    pr = z_pr.labels
    dm = np.isin(pr, [int(ZoneLabel.NA_DM), int(ZoneLabel.HA_DM)])
    bc = np.isin(pr, [int(ZoneLabel.NA_BC), int(ZoneLabel.HA_BC)])
    out[dm & is_ha] = int(ZoneLabel.HA_DM)
    out[dm & ~is_ha] = int(ZoneLabel.NA_DM)
    out[bc & is_ha] = int(ZoneLabel.HA_BC)
    out[bc & ~is_ha] = int(ZoneLabel.NA_BC)
    z_ps = ZoneMask(out, z_pr.pixel_size)
    z_ps.check_mode(mode)
    return z_ps
