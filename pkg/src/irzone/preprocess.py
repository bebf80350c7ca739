"""Sequence preprocessing: shift registration, damaged-frame removal, and
per-pixel recovery-curve fitting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_MAX_SHIFT = 5          # px; larger drifts are treated as fatal
DEFAULT_OUTLIER_FRAC = 0.1
DEFAULT_OUTLIER_TEMP_DEV = 1.0  # °C
NOISE_FLOOR_C = 0.03           # imager sensitivity
DEGENERATE_RANGE_C = 2 * NOISE_FLOOR_C
TAU_MIN, TAU_MAX = 0.1, 10_000.0


class PipelineAbort(RuntimeError):
    """Unrecoverable preprocessing failure (e.g. no usable frames left)."""


@dataclass
class ShiftEstimate:
    dx: float
    dy: float
    peak_score: float
    fatal: bool = False


@dataclass
class PreprocessReport:
    shifts: list[ShiftEstimate] = field(default_factory=list)
    deleted: list[tuple[int, str]] = field(default_factory=list)  # (frame idx, reason)
    kept: list[int] = field(default_factory=list)
    valid_mask: np.ndarray | None = None  # 2D bool; False where shifting exposed borders

    def lines(self) -> list[str]:
        out = [f"kept {len(self.kept)} deleted {len(self.deleted)}"]
        for i, s in enumerate(self.shifts):
            out.append(
                f"frame {i} dx {s.dx:+.3f} dy {s.dy:+.3f} score {s.peak_score:.4f}"
                + (" FATAL" if s.fatal else "")
            )
        for idx, reason in self.deleted:
            out.append(f"deleted {idx} {reason}")
        return out


def _parabolic_refine(scores, peak):
    """3-point parabola vertex offset in [-0.5, 0.5] around an interior peak."""
    a, b, c = scores[peak - 1], scores[peak], scores[peak + 1]
    denom = a - 2 * b + c
    if denom >= -1e-12:  # flat or non-concave; no refinement
        return 0.0
    return float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5))


def estimate_shift(reference, target, max_shift=DEFAULT_MAX_SHIFT, highpass_sigma=4.0):
    """Translation of `target` content relative to `reference`.

    Integer-lag normalized cross-correlation over a (2m+1)^2 window, refined
    per axis by 3-point parabolic interpolation. A peak pinned to the window
    boundary is flagged fatal.

    Frames are high-pass filtered before correlating: the recovery inverts
    the large-scale warm/cold contrast between tissue regions over time,
    which anticorrelates raw frames taken far apart, while the fine texture
    keeps its sign throughout.
    """
    from scipy.ndimage import gaussian_filter

    reference = np.asarray(reference, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if reference.shape != target.shape:
        raise ValueError("frame shapes differ")
    h, w = reference.shape
    if h < 16 or w < 16:
        raise ValueError("frames must be at least 16x16")
    if highpass_sigma > 0:
        reference = reference - gaussian_filter(reference, highpass_sigma, mode="nearest")
        target = target - gaussian_filter(target, highpass_sigma, mode="nearest")
    m = int(max_shift)
    scores = np.full((2 * m + 1, 2 * m + 1), -np.inf)
    for iy, ly in enumerate(range(-m, m + 1)):
        for ix, lx in enumerate(range(-m, m + 1)):
            # target content moved by (+lx, +ly): ref[y, x] ~ target[y+ly, x+lx]
            ry0, ry1 = max(0, -ly), min(h, h - ly)
            rx0, rx1 = max(0, -lx), min(w, w - lx)
            a = reference[ry0:ry1, rx0:rx1]
            b = target[ry0 + ly : ry1 + ly, rx0 + lx : rx1 + lx]
            a0 = a - a.mean()
            b0 = b - b.mean()
            denom = np.sqrt((a0 * a0).sum() * (b0 * b0).sum())
            scores[iy, ix] = (a0 * b0).sum() / denom if denom > 0 else 0.0
    py, px = np.unravel_index(np.argmax(scores), scores.shape)
    fatal = py in (0, 2 * m) or px in (0, 2 * m)
    dy = float(py - m)
    dx = float(px - m)
    if not fatal and scores[py, px] < 1.0 - 1e-9:  # a perfect peak is already exact
        dx += _parabolic_refine(scores[py, :], px)
        dy += _parabolic_refine(scores[:, px], py)
    peak = float(np.clip(scores[py, px], 0.0, 1.0))
    return ShiftEstimate(dx=dx, dy=dy, peak_score=peak, fatal=fatal)


def _resample_to_reference(frame, dx, dy):
    """Bilinear sample frame at (y+dy, x+dx); returns (aligned, valid)."""
    h, w = frame.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    xs = xx + dx
    ys = yy + dy
    valid = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    xs = np.clip(xs, 0, w - 1)
    ys = np.clip(ys, 0, h - 1)
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    f = frame.astype(np.float64)
    out = (
        f[y0, x0] * (1 - fx) * (1 - fy)
        + f[y0, x1] * fx * (1 - fy)
        + f[y1, x0] * (1 - fx) * fy
        + f[y1, x1] * fx * fy
    )
    return out, valid


SNAP_EPS = 0.15  # px; sub-snap estimates are treated as zero (idempotence)


def register_sequence(seq, max_shift=DEFAULT_MAX_SHIFT):
    """Align every frame onto the first frame's grid (translation only).

    Each frame is estimated against the previously aligned frame rather than
    frame 0: the recovery decorrelates frames far apart in time, while
    adjacent frames stay strongly correlated. The previously aligned frame is
    already on frame 0's grid, so the estimate is the absolute shift.

    Rotations and super-threshold shifts are not corrected: those frames are
    flagged fatal for the damaged-frame stage to delete.
    """
    from .phantom import ThermalSequence

    if seq.n_frames < 2:
        raise PipelineAbort("need at least 2 frames to register")
    report = PreprocessReport()
    h, w = seq.frame_shape
    valid = np.ones((h, w), dtype=bool)
    out = np.empty_like(seq.data, dtype=np.float32)
    out[0] = seq.data[0]
    report.shifts.append(ShiftEstimate(0.0, 0.0, 1.0))
    prev = seq.data[0].astype(np.float64)
    for i in range(1, seq.n_frames):
        est = estimate_shift(prev, seq.data[i], max_shift=max_shift)
        if not est.fatal and max(abs(est.dx), abs(est.dy)) < SNAP_EPS:
            est = ShiftEstimate(0.0, 0.0, est.peak_score)
        report.shifts.append(est)
        if est.fatal:
            out[i] = seq.data[i]
            continue  # reference frozen; frame is deleted downstream
        if est.dx == 0.0 and est.dy == 0.0:
            out[i] = seq.data[i]
        else:
            aligned, v = _resample_to_reference(
                seq.data[i].astype(np.float64), est.dx, est.dy
            )
            out[i] = aligned.astype(np.float32)
            valid &= v
        prev = out[i].astype(np.float64)
    if all(s.fatal for s in report.shifts[1:]):
        raise PipelineAbort("all frames flagged fatal during registration")
    report.valid_mask = valid
    report.kept = list(range(seq.n_frames))
    return (
        ThermalSequence(out, seq.timestamps.copy(), seq.pixel_size, dict(seq.meta)),
        report,
    )


def remove_damaged_frames(seq, report, outlier_frac=DEFAULT_OUTLIER_FRAC,
                          outlier_temp_dev=DEFAULT_OUTLIER_TEMP_DEV):
    """Drop frames flagged fatal by registration plus foreign-object frames.

    A frame is a foreign-object frame when more than `outlier_frac` of its
    pixels deviate from the per-pixel temporal median of its neighboring
    frames (window of up to 4, the frame itself excluded) by more than
    `outlier_temp_dev`. The window keeps the detector blind to the recovery
    trend itself: against a whole-sequence median, normal recovery dynamics
    (several °C over the sequence) would flag every frame. Single pass;
    timestamps of kept frames are preserved.
    """
    from .phantom import ThermalSequence

    n = seq.n_frames
    fatal = {i for i, s in enumerate(report.shifts) if s.fatal} if report.shifts else set()
    candidates = [i for i in range(n) if i not in fatal]
    if not candidates:
        raise PipelineAbort("all frames fatal")
    deleted = []
    kept = []
    for i in range(n):
        if i in fatal:
            deleted.append((i, "fatal shift"))
            continue
        others = [j for j in candidates if j != i]
        others.sort(key=lambda j: (abs(j - i), j))
        window = sorted(others[:4])
        if not window:
            kept.append(i)
            continue
        median = np.median(seq.data[window], axis=0)
        frac = float(np.mean(np.abs(seq.data[i] - median) > outlier_temp_dev))
        if frac > outlier_frac:
            deleted.append((i, "foreign object"))
        else:
            kept.append(i)
    if len(kept) < 3:
        raise PipelineAbort(f"only {len(kept)} frames remain after damage removal")
    out_report = PreprocessReport(
        shifts=report.shifts,
        deleted=deleted,
        kept=kept,
        valid_mask=report.valid_mask,
    )
    return (
        ThermalSequence(
            seq.data[kept], seq.timestamps[kept], seq.pixel_size, dict(seq.meta)
        ),
        out_report,
    )


@dataclass
class RecoveryFit:
    t_base: float
    dt: float
    tau: float
    rmse: float
    n_used: int
    degenerate: bool


def fit_recovery_batch(series, times, max_iter=50, tol=1e-9,
                       degenerate_range=DEGENERATE_RANGE_C):
    """Vectorized least-squares fit of T(t) = T_base - dT exp(-t/tau).

    series: [N, T] float array, times: [T]. Returns dict of [N] arrays
    (t_base, dt, tau, rmse, degenerate). Init: T_base = max, dT = max - first
    sample, tau from log-linear regression; refined by Gauss-Newton.
    """
    y = np.asarray(series, dtype=np.float64)
    t = np.asarray(times, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != t.shape[0]:
        raise ValueError("series must be [N, T] matching times")
    if t.shape[0] < 3:
        raise ValueError("need at least 3 samples")
    if not np.all(np.diff(t) > 0):
        raise ValueError("times must be strictly increasing")
    n, T = y.shape

    a = y.max(axis=1)
    b = a - y[:, 0]
    rng_y = y.max(axis=1) - y.min(axis=1)
    degenerate = rng_y < degenerate_range

    # log-linear tau init: log(a + eps - y) ~ log b - t / tau
    eps = 1e-6
    z = np.log(np.maximum(a[:, None] + eps - y, 1e-12))
    t_mean = t.mean()
    z_mean = z.mean(axis=1)
    denom = np.sum((t - t_mean) ** 2)
    slope = (z * (t - t_mean)).sum(axis=1) / denom
    with np.errstate(divide="ignore"):
        tau = np.where(slope < -1e-12, -1.0 / slope, 30.0)
    tau = np.clip(tau, 1e-3, 1e7)
    b = np.maximum(b, 1e-9)

    active = ~degenerate
    for _ in range(max_iter):
        if not np.any(active):
            break
        ai, bi, taui = a[active], b[active], tau[active]
        e = np.exp(-t[None, :] / taui[:, None])          # [M, T]
        f = ai[:, None] - bi[:, None] * e
        r = y[active] - f
        # Jacobian of f wrt (a, b, tau)
        j_a = np.ones_like(e)
        j_b = -e
        j_tau = -bi[:, None] * e * (t[None, :] / (taui**2)[:, None])
        J = np.stack([j_a, j_b, j_tau], axis=2)          # [M, T, 3]
        JtJ = np.einsum("mti,mtj->mij", J, J)
        Jtr = np.einsum("mti,mt->mi", J, r)
        JtJ += 1e-12 * np.eye(3)[None, :, :]
        step = np.linalg.solve(JtJ, Jtr[:, :, None])[:, :, 0]
        a_new = ai + step[:, 0]
        b_new = bi + step[:, 1]
        tau_new = np.clip(taui + step[:, 2], 1e-3, 1e7)
        a[active], b[active], tau[active] = a_new, b_new, tau_new
        norms = np.linalg.norm(step, axis=1)
        still = np.zeros_like(active)
        still[np.flatnonzero(active)[norms >= tol]] = True
        active = still

    e = np.exp(-t[None, :] / np.clip(tau, 1e-3, 1e7)[:, None])
    resid = y - (a[:, None] - b[:, None] * e)
    rmse = np.sqrt(np.mean(resid**2, axis=1))
    degenerate = degenerate | (tau < TAU_MIN) | (tau > TAU_MAX) | ~np.isfinite(rmse)
    return {
        "t_base": a,
        "dt": b,
        "tau": tau,
        "rmse": np.where(np.isfinite(rmse), rmse, 0.0),
        "degenerate": degenerate,
    }


def fit_recovery(series, times, **kw) -> RecoveryFit:
    """Single-pixel fit; never raises on junk data (returns a degenerate fit)."""
    y = np.asarray(series, dtype=np.float64)
    t = np.asarray(times, dtype=np.float64)
    if y.shape[0] < 3:
        raise ValueError("need at least 3 samples")
    try:
        res = fit_recovery_batch(y[None, :], t, **kw)
    except ValueError:
        raise
    return RecoveryFit(
        t_base=float(res["t_base"][0]),
        dt=float(res["dt"][0]),
        tau=float(res["tau"][0]),
        rmse=float(res["rmse"][0]),
        n_used=int(y.shape[0]),
        degenerate=bool(res["degenerate"][0]),
    )
