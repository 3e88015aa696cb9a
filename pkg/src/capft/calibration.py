"""Least-squares calibration from capacitance counts to wrenches.

The map is linear in a quadratic feature expansion of the tared counts:
for each frame the feature vector stacks the twelve baseline-subtracted
channels and their elementwise squares (24 features), or only the eight
shear channels and their squares (16) when normal-mode electrodes are
excluded.  A 6 x F matrix fitted by a ridge-regularized normal equation
maps features to (Fx, Fy, Fz, Mx, My, Mz) with forces in N and moments
in mN*m.

Temperature handling is separate and applied before feature expansion:
a per-channel quadratic baseline polynomial in (T - T_ref), fitted on
no-load sweep data, is subtracted from raw counts so that the channels
are referred back to the tare temperature.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Wrench
from .sensor_model import NUM_CHANNELS, CapacitanceFrame

AXIS_NAMES = ("Fx", "Fy", "Fz", "Mx", "My", "Mz")
MODEL_FORMAT_VERSION = 1

_MODE_FEATURES = {"full": 24, "shear_only": 16}


class CalibrationError(ValueError):
    """Base class for calibration model and data problems."""


class IllConditionedError(CalibrationError):
    """Normal equation is rank deficient or there is too little data."""


class ChannelMismatchError(CalibrationError):
    """Model shape does not match its declared channel mode."""


class ModelFormatError(CalibrationError):
    """Serialized model file is malformed."""


def tare(frames: Sequence[CapacitanceFrame]) -> np.ndarray:
    """Per-channel mean of no-load frames, the baseline for feature expansion."""
    if not frames:
        raise IllConditionedError("tare requires at least one frame")
    counts = np.array([f.counts for f in frames], dtype=float)
    return counts.mean(axis=0)


def _check_mode(mode: str) -> int:
    if mode not in _MODE_FEATURES:
        raise CalibrationError(f"unknown mode {mode!r}, expected one of {sorted(_MODE_FEATURES)}")
    return _MODE_FEATURES[mode]


def _feature_matrix(counts: np.ndarray, baseline: np.ndarray, mode: str) -> np.ndarray:
    """(F, N) feature matrix from (N, 12) raw counts."""
    _check_mode(mode)
    if baseline.shape != (NUM_CHANNELS,):
        raise CalibrationError(f"baseline must have {NUM_CHANNELS} channels")
    tared = counts.astype(float) - baseline
    if mode == "shear_only":
        tared = tared[:, 4:]
    return np.vstack([tared.T, (tared * tared).T])


def expand_features(frame: CapacitanceFrame, baseline: np.ndarray, mode: str = "full") -> np.ndarray:
    """Feature vector for one frame: tared counts followed by their squares."""
    return _feature_matrix(np.array([frame.counts]), np.asarray(baseline, dtype=float), mode)[:, 0]


@dataclass(frozen=True)
class CalibrationModel:
    """Fitted linear map from quadratic count features to a wrench."""

    matrix: np.ndarray  # (6, F)
    baseline: np.ndarray  # (12,)
    mode: str
    ridge: float
    train_rmse: tuple[float, ...]
    normal_eq_residual: float  # max |X (Y - A X)^T| / max |X Y^T|, optimality check

    def __post_init__(self) -> None:
        expected = _check_mode(self.mode)
        if self.matrix.shape != (6, expected):
            raise ChannelMismatchError(
                f"mode {self.mode!r} expects a (6, {expected}) matrix, got {self.matrix.shape}")
        if self.baseline.shape != (NUM_CHANNELS,):
            raise ChannelMismatchError("baseline must cover all 12 channels")


def fit(frames: Sequence[CapacitanceFrame], wrenches: Sequence[Wrench],
        baseline: np.ndarray, mode: str = "full", ridge: float | None = None) -> CalibrationModel:
    """Fit the feature-to-wrench matrix by a ridge normal equation.

    Solves (X X^T + ridge * I) A^T = X Y^T.  ridge=None picks the default
    1e-9 * trace(X X^T) / 24; ridge=0.0 is the plain normal equation and
    requires full-rank features.
    """
    n_feat = _check_mode(mode)
    if len(frames) != len(wrenches):
        raise CalibrationError("frames and wrenches must pair up")
    if len(frames) < n_feat:
        raise IllConditionedError(
            f"need at least {n_feat} samples for mode {mode!r}, got {len(frames)}")
    baseline = np.asarray(baseline, dtype=float)
    counts = np.array([f.counts for f in frames], dtype=float)
    x = _feature_matrix(counts, baseline, mode)
    y = np.array([w.as_tuple() for w in wrenches], dtype=float).T
    gram = x @ x.T
    if ridge is None:
        ridge = 1e-9 * np.trace(gram) / 24.0
    if ridge < 0.0:
        raise CalibrationError("ridge must be non-negative")
    if ridge == 0.0 and np.linalg.matrix_rank(gram, hermitian=True) < n_feat:
        raise IllConditionedError("feature Gram matrix is rank deficient with ridge 0")
    xyt = x @ y.T
    try:
        a = np.linalg.solve(gram + ridge * np.eye(n_feat), xyt).T
    except np.linalg.LinAlgError as exc:
        raise IllConditionedError(f"normal equation solve failed: {exc}") from exc
    resid = y - a @ x
    grad = x @ resid.T
    denom = np.max(np.abs(xyt))
    grad_ratio = float(np.max(np.abs(grad)) / denom) if denom > 0.0 else 0.0
    rmse = tuple(float(v) for v in np.sqrt((resid * resid).mean(axis=1)))
    return CalibrationModel(matrix=a, baseline=baseline, mode=mode, ridge=float(ridge),
                            train_rmse=rmse, normal_eq_residual=grad_ratio)


def predict(model: CalibrationModel, frame: CapacitanceFrame,
            baseline: np.ndarray | None = None) -> Wrench:
    """Wrench estimate for one frame; baseline defaults to the fit-time tare."""
    base = model.baseline if baseline is None else np.asarray(baseline, dtype=float)
    phi = expand_features(frame, base, model.mode)
    return Wrench.from_sequence(model.matrix @ phi)


def _predict_matrix(model: CalibrationModel, counts: np.ndarray) -> np.ndarray:
    return model.matrix @ _feature_matrix(counts, model.baseline, model.mode)


@dataclass(frozen=True)
class Metrics:
    """Per-axis regression quality; axis order matches AXIS_NAMES."""

    rmse: tuple[float, ...]
    r_squared: tuple[float, ...]  # nan where the reference axis is constant

    def summary_lines(self) -> list[str]:
        lines = []
        for name, rm, r2 in zip(AXIS_NAMES, self.rmse, self.r_squared):
            unit = "N" if name.startswith("F") else "mN*m"
            r2_text = "n/a" if math.isnan(r2) else f"{r2:.4f}"
            lines.append(f"{name}: rmse {rm:.4f} {unit}, R^2 {r2_text}")
        return lines


def evaluate(model: CalibrationModel, frames: Sequence[CapacitanceFrame],
             wrenches: Sequence[Wrench]) -> Metrics:
    """RMSE and R^2 per axis on held-out data."""
    if len(frames) != len(wrenches) or not frames:
        raise CalibrationError("evaluation needs matching, non-empty frames and wrenches")
    counts = np.array([f.counts for f in frames], dtype=float)
    pred = _predict_matrix(model, counts)
    ref = np.array([w.as_tuple() for w in wrenches], dtype=float).T
    err = pred - ref
    rmse = np.sqrt((err * err).mean(axis=1))
    ss_res = (err * err).sum(axis=1)
    ss_tot = ((ref - ref.mean(axis=1, keepdims=True)) ** 2).sum(axis=1)
    r2 = np.where(ss_tot > 0.0, 1.0 - ss_res / np.where(ss_tot > 0.0, ss_tot, 1.0), np.nan)
    return Metrics(rmse=tuple(float(v) for v in rmse), r_squared=tuple(float(v) for v in r2))


@dataclass(frozen=True)
class TempCompensator:
    """Per-channel quadratic baseline in (T - reference_temp), counts."""

    a0: tuple[float, ...]  # baseline counts at the reference temperature
    a1: tuple[float, ...]  # counts per degC
    a2: tuple[float, ...]  # counts per degC^2
    reference_temp: float
    r_squared: tuple[float, ...]

    def __post_init__(self) -> None:
        for coeffs in (self.a0, self.a1, self.a2, self.r_squared):
            if len(coeffs) != NUM_CHANNELS:
                raise CalibrationError("compensator needs one coefficient set per channel")

    def correction(self, temperature: float) -> np.ndarray:
        """Drift counts to subtract at this temperature (zero at reference)."""
        dt = temperature - self.reference_temp
        return np.asarray(self.a1) * dt + np.asarray(self.a2) * dt * dt


def fit_temp_baseline(frames: Sequence[CapacitanceFrame],
                      reference_temp: float) -> TempCompensator:
    """Quadratic counts-vs-temperature baseline from a no-load sweep.

    Frames are grouped by their recorded temperature and averaged per group
    before the weighted polynomial fit, so CDC read noise does not drown the
    drift curve.  Requires at least 3 distinct temperatures spanning 5 degC.
    """
    if not frames:
        raise IllConditionedError("temperature fit requires frames")
    temps = np.array([f.temperature for f in frames])
    counts = np.array([f.counts for f in frames], dtype=float)
    levels = np.unique(temps)
    if len(levels) < 3:
        raise IllConditionedError(f"need >= 3 distinct temperatures, got {len(levels)}")
    if levels.max() - levels.min() < 5.0:
        raise IllConditionedError("temperature span below 5 degC")
    means = np.array([counts[temps == t].mean(axis=0) for t in levels])
    weights = np.sqrt(np.array([(temps == t).sum() for t in levels], dtype=float))
    x = levels - reference_temp
    a0, a1, a2, r2 = [], [], [], []
    for k in range(NUM_CHANNELS):
        c2, c1, c0 = np.polyfit(x, means[:, k], 2, w=weights)
        fitval = c0 + c1 * x + c2 * x * x
        res = means[:, k] - fitval
        tot = means[:, k] - np.average(means[:, k], weights=weights * weights)
        ss_res = float(np.sum(weights * weights * res * res))
        ss_tot = float(np.sum(weights * weights * tot * tot))
        a0.append(float(c0))
        a1.append(float(c1))
        a2.append(float(c2))
        r2.append(1.0 - ss_res / ss_tot if ss_tot > 0.0 else float("nan"))
    return TempCompensator(a0=tuple(a0), a1=tuple(a1), a2=tuple(a2),
                           reference_temp=reference_temp, r_squared=tuple(r2))


def compensate(frame: CapacitanceFrame, temperature: float,
               comp: TempCompensator) -> CapacitanceFrame:
    """Refer a frame's counts back to the compensator's reference temperature.

    Subtracts the fitted drift polynomial and re-rounds to integer counts;
    at the reference temperature (or with zero drift coefficients) the frame
    passes through unchanged.
    """
    corr = comp.correction(temperature)
    adjusted = np.maximum(np.rint(np.asarray(frame.counts, dtype=float) - corr), 0.0)
    return CapacitanceFrame(
        normal_counts=tuple(int(c) for c in adjusted[:4]),
        shear_counts=tuple(int(c) for c in adjusted[4:]),
        timestamp=frame.timestamp,
        temperature=frame.temperature,
    )


def _counts_matrix_compensated(frames: Sequence[CapacitanceFrame],
                               comp: TempCompensator) -> np.ndarray:
    counts = np.array([f.counts for f in frames], dtype=float)
    temps = np.array([f.temperature for f in frames])
    dt = temps - comp.reference_temp
    corr = np.asarray(comp.a1) * dt[:, None] + np.asarray(comp.a2) * (dt * dt)[:, None]
    return np.maximum(np.rint(counts - corr), 0.0)


def save_model(model: CalibrationModel, path: str | Path,
               comp: TempCompensator | None = None) -> None:
    """Write the model (and optional temperature compensator) as JSON."""
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "mode": model.mode,
        "ridge": model.ridge,
        "baseline": [float(v) for v in model.baseline],
        "matrix": [[float(v) for v in row] for row in model.matrix],
        "train_rmse": list(model.train_rmse),
        "normal_eq_residual": model.normal_eq_residual,
    }
    if comp is not None:
        payload["temp_compensator"] = {
            "a0": list(comp.a0), "a1": list(comp.a1), "a2": list(comp.a2),
            "reference_temp": comp.reference_temp, "r_squared": list(comp.r_squared),
        }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_model(path: str | Path) -> tuple[CalibrationModel, TempCompensator | None]:
    """Read a model file written by save_model, validating shape and version."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    try:
        if payload["format_version"] != MODEL_FORMAT_VERSION:
            raise ModelFormatError(
                f"unsupported model format version {payload['format_version']!r}")
        model = CalibrationModel(
            matrix=np.array(payload["matrix"], dtype=float),
            baseline=np.array(payload["baseline"], dtype=float),
            mode=payload["mode"],
            ridge=float(payload["ridge"]),
            train_rmse=tuple(float(v) for v in payload["train_rmse"]),
            normal_eq_residual=float(payload["normal_eq_residual"]),
        )
        comp = None
        if payload.get("temp_compensator") is not None:
            tc = payload["temp_compensator"]
            comp = TempCompensator(
                a0=tuple(float(v) for v in tc["a0"]),
                a1=tuple(float(v) for v in tc["a1"]),
                a2=tuple(float(v) for v in tc["a2"]),
                reference_temp=float(tc["reference_temp"]),
                r_squared=tuple(float(v) for v in tc["r_squared"]),
            )
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, CalibrationError) as exc:
        raise ModelFormatError(f"malformed model file {path}: {exc}") from exc
    return model, comp
