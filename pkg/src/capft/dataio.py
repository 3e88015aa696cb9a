"""Synthetic trial generation and the on-disk log format.

A trial is a fixed-rate sequence of reference wrenches alongside the
simulated sensor counts they produced.  Logs are CSV with an exact header

    t,T,Z1,Z2,Z3,Z4,X1,X2,X3,X4,Y1,Y2,Y3,Y4,Fx,Fy,Fz,Mx,My,Mz

preceded by '#'-prefixed metadata lines (name, seed, sensor parameter
hash).  Floats are written with full round-trip precision and counts as
bare integers, so write -> load -> write is byte identical.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Wrench
from .sensor_model import (
    CapacitanceFrame,
    DriftModel,
    FirstOrderLag,
    SensorParams,
    SensorRangeError,
    normal_mode_capacitance,
    sample_trajectory,
    shear_mode_capacitance,
    solve_deformation,
)

LOG_HEADER = "t,T,Z1,Z2,Z3,Z4,X1,X2,X3,X4,Y1,Y2,Y3,Y4,Fx,Fy,Fz,Mx,My,Mz"
_NUM_COLUMNS = 20


class LogFormatError(ValueError):
    """Log file violates the format contract; message carries the line number."""


class ScenarioRangeError(ValueError):
    """Declared excitation ranges exceed the sensor's mechanical range."""


@dataclass(frozen=True)
class Scenario:
    """Excitation recipe for one synthetic trial.

    Each axis sweeps a band-limited sum of sinusoids rescaled to exactly
    cover its (lo, hi) range; a degenerate range holds the axis constant.
    Temperature is stepped from temp_start to temp_end in temp_steps equal
    plateaus (1 step means constant temp_start, 0 means a continuous ramp).
    """

    name: str
    duration: float  # s
    seed: int
    fx: tuple[float, float] = (0.0, 0.0)
    fy: tuple[float, float] = (0.0, 0.0)
    fz: tuple[float, float] = (0.0, 0.0)
    mx: tuple[float, float] = (0.0, 0.0)  # mN*m
    my: tuple[float, float] = (0.0, 0.0)
    mz: tuple[float, float] = (0.0, 0.0)
    sample_rate: float = 360.0  # Hz
    band_hz: float = 2.0
    components: int = 4
    temp_start: float = 25.0
    temp_end: float = 25.0
    temp_steps: int = 1
    noise_enabled: bool = True
    drift_enabled: bool = True

    def __post_init__(self) -> None:
        if self.duration <= 0.0 or self.sample_rate <= 0.0:
            raise ScenarioRangeError("duration and sample rate must be positive")
        if self.band_hz <= 0.0 or self.band_hz > 2.0:
            raise ScenarioRangeError("excitation band must lie in (0, 2] Hz")
        if self.components < 1:
            raise ScenarioRangeError("need at least one sinusoid component")
        if self.temp_steps < 0:
            raise ScenarioRangeError("temp_steps must be >= 0")
        for lo, hi in self.ranges():
            if hi < lo:
                raise ScenarioRangeError(f"axis range ({lo}, {hi}) is inverted")

    def ranges(self) -> tuple[tuple[float, float], ...]:
        return (self.fx, self.fy, self.fz, self.mx, self.my, self.mz)

    @property
    def sample_count(self) -> int:
        return int(round(self.duration * self.sample_rate))


@dataclass(frozen=True)
class Trial:
    """Paired sensor frames and reference wrenches at a fixed rate."""

    name: str
    seed: int
    params_hash: str
    frames: tuple[CapacitanceFrame, ...]
    wrenches: tuple[Wrench, ...]

    def __post_init__(self) -> None:
        if len(self.frames) != len(self.wrenches) or not self.frames:
            raise ValueError("trial needs matching, non-empty frames and wrenches")
        times = [f.timestamp for f in self.frames]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trial timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.frames)


def _axis_signal(rng: np.random.Generator, t: np.ndarray, lo: float, hi: float,
                 band_hz: float, components: int) -> np.ndarray:
    # draw per-axis randomness unconditionally to keep the stream layout stable
    freqs = rng.uniform(0.05, band_hz, components)
    phases = rng.uniform(0.0, 2.0 * math.pi, components)
    amps = rng.uniform(0.5, 1.0, components)
    if hi == lo:
        return np.full_like(t, lo)
    s = np.zeros_like(t)
    for f, p, a in zip(freqs, phases, amps):
        s += a * np.sin(2.0 * math.pi * f * t + p)
    smin, smax = s.min(), s.max()
    if smax == smin:
        return np.full_like(t, 0.5 * (lo + hi))
    return lo + (hi - lo) * (s - smin) / (smax - smin)


def _temperatures(scenario: Scenario, t: np.ndarray) -> np.ndarray:
    if scenario.temp_steps == 1:
        return np.full_like(t, scenario.temp_start)
    frac = t / scenario.duration
    if scenario.temp_steps == 0:  # continuous ramp
        return scenario.temp_start + (scenario.temp_end - scenario.temp_start) * frac
    levels = np.linspace(scenario.temp_start, scenario.temp_end, scenario.temp_steps)
    idx = np.minimum((frac * scenario.temp_steps).astype(int), scenario.temp_steps - 1)
    return levels[idx]


def check_mechanical_range(scenario: Scenario, params: SensorParams) -> None:
    """Reject scenarios whose range corners leave the sensor's valid stroke.

    Evaluates the forward model at every corner of the declared axis ranges;
    since each axis signal is bounded by its range, corner feasibility
    bounds the whole trial.
    """
    for corner in itertools.product(*(rng for rng in scenario.ranges())):
        try:
            d = solve_deformation(Wrench.from_sequence(corner), params.pillars, params.geometry)
            normal_mode_capacitance(d, params.geometry)
            shear_mode_capacitance(d, params.geometry)
        except SensorRangeError as exc:
            raise ScenarioRangeError(
                f"scenario {scenario.name!r} corner {corner} outside mechanical range: {exc}"
            ) from exc


def generate_trial(scenario: Scenario, params: SensorParams,
                   seed_override: int | None = None) -> Trial:
    """Simulate one trial: wrench trajectory in, counts out.

    Deterministic for a given (scenario, params, seed); the trajectory and
    the CDC noise share one seeded generator.
    """
    check_mechanical_range(scenario, params)
    seed = scenario.seed if seed_override is None else seed_override
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = scenario.sample_count
    t = np.arange(n) / scenario.sample_rate
    axes = [_axis_signal(rng, t, lo, hi, scenario.band_hz, scenario.components)
            for lo, hi in scenario.ranges()]
    wrench_arr = np.column_stack(axes)
    temps = _temperatures(scenario, t)
    eff = params
    if not scenario.drift_enabled:
        eff = replace(eff, drift=DriftModel.disabled(params.drift.reference_temp))
    if not scenario.noise_enabled:
        eff = replace(eff, cdc=replace(params.cdc, noise_sigma_counts=0.0))
    if params.cdc.lag_corner_hz is not None:
        lag = FirstOrderLag(params.cdc.lag_corner_hz)
        dt = 1.0 / scenario.sample_rate
        wrench_arr = np.array(
            [lag.step(Wrench.from_sequence(row), dt).as_tuple() for row in wrench_arr])
    counts = sample_trajectory(wrench_arr, temps, eff, rng)
    frames = tuple(
        CapacitanceFrame(
            normal_counts=tuple(int(c) for c in counts[i, :4]),
            shear_counts=tuple(int(c) for c in counts[i, 4:]),
            timestamp=float(t[i]),
            temperature=float(temps[i]),
        )
        for i in range(n)
    )
    wrenches = tuple(Wrench.from_sequence(row) for row in wrench_arr)
    return Trial(name=scenario.name, seed=seed, params_hash=params.hash(),
                 frames=frames, wrenches=wrenches)


def write_log(trial: Trial, path: str | Path) -> None:
    """Serialize a trial; see the module docstring for the format."""
    lines = [
        f"# name={trial.name}",
        f"# seed={trial.seed}",
        f"# params={trial.params_hash}",
        LOG_HEADER,
    ]
    for frame, w in zip(trial.frames, trial.wrenches):
        cells = [repr(frame.timestamp), repr(frame.temperature)]
        cells += [str(c) for c in frame.counts]
        cells += [repr(v) for v in w.as_tuple()]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def _parse_metadata(lines: list[tuple[int, str]]) -> tuple[dict, int]:
    meta = {}
    consumed = 0
    for lineno, text in lines:
        if not text.startswith("#"):
            break
        consumed += 1
        body = text[1:].strip()
        if "=" in body:
            key, _, value = body.partition("=")
            meta[key.strip()] = value.strip()
    return meta, consumed


def load_log(path: str | Path) -> Trial:
    """Parse a trial log, reporting the first offending line on error."""
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise LogFormatError(f"cannot read log {path}: {exc}") from exc
    lines = [(i + 1, line.rstrip("\r")) for i, line in enumerate(raw.split("\n"))]
    if lines and lines[-1][1] == "":
        lines = lines[:-1]
    if not lines:
        raise LogFormatError(f"{path}: empty log")
    meta, consumed = _parse_metadata(lines)
    body = lines[consumed:]
    if not body:
        raise LogFormatError(f"{path}: line {consumed + 1}: missing header row")
    header_no, header = body[0]
    if header != LOG_HEADER:
        raise LogFormatError(f"{path}: line {header_no}: bad header {header!r}")
    frames: list[CapacitanceFrame] = []
    wrenches: list[Wrench] = []
    prev_t = None
    for lineno, text in body[1:]:
        cells = text.split(",")
        if len(cells) != _NUM_COLUMNS:
            raise LogFormatError(
                f"{path}: line {lineno}: expected {_NUM_COLUMNS} columns, got {len(cells)}")
        try:
            t = float(cells[0])
            temp = float(cells[1])
            counts = [int(c) for c in cells[2:14]]
            wvals = [float(c) for c in cells[14:20]]
        except ValueError as exc:
            raise LogFormatError(f"{path}: line {lineno}: {exc}") from exc
        if not math.isfinite(t) or not math.isfinite(temp) \
                or not all(math.isfinite(v) for v in wvals):
            raise LogFormatError(f"{path}: line {lineno}: non-finite value")
        if any(c < 0 for c in counts):
            raise LogFormatError(f"{path}: line {lineno}: negative count")
        if prev_t is not None and t <= prev_t:
            raise LogFormatError(f"{path}: line {lineno}: non-monotonic timestamp {t!r}")
        prev_t = t
        frames.append(CapacitanceFrame(
            normal_counts=tuple(counts[:4]), shear_counts=tuple(counts[4:]),
            timestamp=t, temperature=temp))
        wrenches.append(Wrench.from_sequence(wvals))
    if not frames:
        raise LogFormatError(f"{path}: no data rows")
    try:
        seed = int(meta.get("seed", "-1"))
    except ValueError:
        seed = -1
    return Trial(name=meta.get("name", Path(path).stem), seed=seed,
                 params_hash=meta.get("params", ""),
                 frames=tuple(frames), wrenches=tuple(wrenches))


def split(trials: Sequence[Trial]) -> tuple[tuple[Trial, ...], Trial]:
    """Hold out the final trial for testing, train on the rest."""
    if len(trials) < 2:
        raise ValueError("split needs at least two trials")
    return tuple(trials[:-1]), trials[-1]


def full_range_scenario(name: str = "full_range", duration: float = 35.0,
                        seed: int = 0) -> Scenario:
    """Default excitation covering the rated load envelope."""
    return Scenario(
        name=name, duration=duration, seed=seed,
        fx=(-5.0, 5.0), fy=(-5.0, 5.0), fz=(0.0, 14.0),
        mx=(-50.0, 50.0), my=(-50.0, 50.0), mz=(-15.0, 15.0),
    )


def small_range_scenario(name: str = "small_range", duration: float = 35.0,
                         seed: int = 0) -> Scenario:
    """Light-touch excitation: a gentler envelope for fine-force work."""
    return Scenario(
        name=name, duration=duration, seed=seed,
        fx=(-2.0, 2.0), fy=(-2.0, 2.0), fz=(0.0, 4.0),
        mx=(-20.0, 20.0), my=(-20.0, 20.0), mz=(-6.0, 6.0),
    )


def no_load_scenario(name: str = "tare", duration: float = 2.0, seed: int = 0) -> Scenario:
    """All axes at rest; used for taring."""
    return Scenario(name=name, duration=duration, seed=seed)


def temp_sweep_scenario(name: str = "temp_sweep", duration: float = 22.0, seed: int = 0,
                        temp_start: float = 20.0, temp_end: float = 30.0,
                        steps: int = 11) -> Scenario:
    """No-load stepped temperature sweep for drift characterization."""
    return Scenario(name=name, duration=duration, seed=seed,
                    temp_start=temp_start, temp_end=temp_end, temp_steps=steps)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "name": s.name, "duration": s.duration, "seed": s.seed,
        "fx": list(s.fx), "fy": list(s.fy), "fz": list(s.fz),
        "mx": list(s.mx), "my": list(s.my), "mz": list(s.mz),
        "sample_rate": s.sample_rate, "band_hz": s.band_hz, "components": s.components,
        "temp_start": s.temp_start, "temp_end": s.temp_end, "temp_steps": s.temp_steps,
        "noise_enabled": s.noise_enabled, "drift_enabled": s.drift_enabled,
    }


def scenario_from_dict(data: dict) -> Scenario:
    try:
        pairs = {k: tuple(float(v) for v in data[k]) for k in ("fx", "fy", "fz", "mx", "my", "mz")}
        return Scenario(
            name=str(data["name"]), duration=float(data["duration"]), seed=int(data["seed"]),
            sample_rate=float(data.get("sample_rate", 360.0)),
            band_hz=float(data.get("band_hz", 2.0)),
            components=int(data.get("components", 4)),
            temp_start=float(data.get("temp_start", 25.0)),
            temp_end=float(data.get("temp_end", 25.0)),
            temp_steps=int(data.get("temp_steps", 1)),
            noise_enabled=bool(data.get("noise_enabled", True)),
            drift_enabled=bool(data.get("drift_enabled", True)),
            **pairs,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioRangeError(f"bad scenario structure: {exc}") from exc
