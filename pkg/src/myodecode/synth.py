"""Preprogrammed movement profiles and synthetic 6-electrode EMG.

The generator stands in for a participant plus the electrode hardware: a
movement schedule is rendered into 25-Hz kinematic trajectories, and each
electrode emits band-limited Gaussian noise whose instantaneous amplitude
follows a rest floor plus direction-dependent synergy gains.  Amplitude
modulation of Gaussian noise keeps the expected rectified envelope
analytically checkable: E|a*N(0,1)| = a*sqrt(2/pi).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import signal

KINEMATIC_RATE_HZ = 25
SAMPLE_RATE_HZ = 1000
SAMPLES_PER_FRAME = SAMPLE_RATE_HZ // KINEMATIC_RATE_HZ  # 40

NOISE_BAND_HZ = (20.0, 450.0)

N_ELECTRODES = 6
N_DOFS = 6

# Canonical DOF order: thumb..little finger flexion/extension, then thumb
# abduction/adduction.  +1 = flexion/abduction, -1 = extension/adduction.
DOF_LABELS = (
    "D1-flex/ext",
    "D2-flex/ext",
    "D3-flex/ext",
    "D4-flex/ext",
    "D5-flex/ext",
    "D1-abd/add",
)

REST_LABEL = "rest"

# Movement vocabulary: paired movements exercise a DOF in both directions
# within one labeled segment; directional movements do a single trapezoid.
# Values are (dof index, tuple of directions).
_MOVEMENTS: dict[str, tuple[int, tuple[int, ...]]] = {}
for _i, _lbl in enumerate(DOF_LABELS):
    _MOVEMENTS[_lbl] = (_i, (1, -1))
for _i in range(5):
    _MOVEMENTS[f"D{_i + 1}-flex"] = (_i, (1,))
    _MOVEMENTS[f"D{_i + 1}-ext"] = (_i, (-1,))
_MOVEMENTS["D1-abd"] = (5, (1,))
_MOVEMENTS["D1-add"] = (5, (-1,))

# Short row codes used by the CSV session schema (4 chars max).
LABEL_CODES = {REST_LABEL: "rest"}
for _i in range(5):
    LABEL_CODES[f"D{_i + 1}-flex/ext"] = f"D{_i + 1}fe"
    LABEL_CODES[f"D{_i + 1}-flex"] = f"D{_i + 1}f"
    LABEL_CODES[f"D{_i + 1}-ext"] = f"D{_i + 1}e"
LABEL_CODES["D1-abd/add"] = "D1ad"
LABEL_CODES["D1-abd"] = "D1a"
LABEL_CODES["D1-add"] = "D1d"
CODE_LABELS = {code: label for label, code in LABEL_CODES.items()}

MOVEMENT_NAMES = tuple(_MOVEMENTS)


@dataclass(frozen=True)
class ElectrodeFrame:
    """One 1-kHz sample across the six single-ended electrodes."""

    t: int  # ms since session start
    samples: np.ndarray  # shape (6,)


@dataclass(frozen=True)
class MovementSchedule:
    """Timing recipe for a preprogrammed training sequence."""

    movements: tuple[str, ...]
    rise_s: float = 0.6
    hold_s: float = 2.0
    rest_s: float = 1.2
    repetitions: int = 1


DEFAULT_SCHEDULE = MovementSchedule(movements=DOF_LABELS, repetitions=2)


def parse_schedule(text: str) -> MovementSchedule:
    """Parse the plain-text schedule config.

    Key = value lines; ``movements`` is a comma-separated list of movement
    names, the remaining keys are ``rise_s``, ``hold_s``, ``rest_s`` and
    ``repetitions``.  Blank lines and ``#`` comments are ignored; omitted
    keys keep their defaults.
    """
    values: dict[str, str] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"schedule line {lineno}: expected 'key = value', got {raw_line!r}")
        values[key.strip()] = value.strip()
    unknown = set(values) - {"movements", "rise_s", "hold_s", "rest_s", "repetitions"}
    if unknown:
        raise ValueError(f"unknown schedule keys: {sorted(unknown)}")
    kwargs = {}
    if "movements" in values:
        kwargs["movements"] = tuple(m.strip() for m in values["movements"].split(",") if m.strip())
    else:
        kwargs["movements"] = DEFAULT_SCHEDULE.movements
    for key in ("rise_s", "hold_s", "rest_s"):
        if key in values:
            kwargs[key] = float(values[key])
    if "repetitions" in values:
        kwargs["repetitions"] = int(values["repetitions"])
    return MovementSchedule(**kwargs)


@dataclass
class MovementProfile:
    """25-Hz kinematic trajectory with per-frame segment labels."""

    dof_labels: tuple[str, ...]
    trajectory: np.ndarray  # shape (n_frames, 6), values in [-1, 1]
    segment_labels: list[str]  # one tag per frame, movement name or "rest"

    @property
    def n_frames(self) -> int:
        return self.trajectory.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_frames / KINEMATIC_RATE_HZ

    def validate(self) -> None:
        if len(self.dof_labels) != N_DOFS or len(set(self.dof_labels)) != N_DOFS:
            raise ValueError("profile must carry 6 distinct DOF labels")
        if self.trajectory.shape != (len(self.segment_labels), N_DOFS):
            raise ValueError("trajectory / segment label length mismatch")
        if self.n_frames and np.max(np.abs(self.trajectory)) > 1.0:
            raise ValueError("kinematic values must lie in [-1, 1]")
        rest = np.array([lbl == REST_LABEL for lbl in self.segment_labels])
        if rest.any() and np.any(self.trajectory[rest] != 0.0):
            raise ValueError("rest frames must have all-zero kinematics")


@dataclass(frozen=True)
class SynergyModel:
    """Electrode activation gains per (DOF, direction).

    ``flexor_gains[e, d]`` scales electrode ``e`` with positive excursion of
    DOF ``d`` (flexion/abduction); ``extensor_gains`` covers the negative
    direction.  ``rest_noise`` is the per-electrode amplitude floor, in the
    same dimensionless ADC-like units as the emitted samples.
    """

    flexor_gains: np.ndarray  # (6 electrodes, 6 DOFs), >= 0
    extensor_gains: np.ndarray  # (6 electrodes, 6 DOFs), >= 0
    rest_noise: np.ndarray  # (6,), > 0

    def validate(self) -> None:
        for name, g in (("flexor", self.flexor_gains), ("extensor", self.extensor_gains)):
            if g.shape != (N_ELECTRODES, N_DOFS):
                raise ValueError(f"{name} gain matrix must be 6x6")
            if np.any(g < 0):
                raise ValueError(f"{name} gains must be nonnegative")
            if np.any(g.sum(axis=0) <= 0):
                raise ValueError(f"every DOF needs a {name}-side electrode with gain > 0")
        if self.rest_noise.shape != (N_ELECTRODES,) or np.any(self.rest_noise <= 0):
            raise ValueError("rest noise amplitude must be positive on all electrodes")


def default_synergy(scale: float = 110.0, rest_noise: float = 9.0) -> SynergyModel:
    """Flexor/extensor electrode split with distinct per-DOF patterns.

    Electrodes 0-2 sit over the flexor compartment and respond to positive
    DOF excursions; electrodes 3-5 cover the extensor side.  The six column
    patterns are chosen to keep the stacked flexor/extensor gain matrix well
    conditioned so all six DOFs are separable from six electrodes.
    """
    flexor = np.array(
        [
            [1.0, 0.0, 0.15, 0.7, 0.0, 0.0],
            [0.15, 1.0, 0.0, 0.7, 0.7, 0.0],
            [0.0, 0.15, 1.0, 0.0, 0.7, 0.7],
        ]
    )
    extensor = np.array(
        [
            [1.0, 0.15, 0.0, 0.0, 0.7, 0.7],
            [0.0, 1.0, 0.15, 0.7, 0.0, 0.7],
            [0.15, 0.0, 1.0, 0.7, 0.7, 0.0],
        ]
    )
    gains_f = np.zeros((N_ELECTRODES, N_DOFS))
    gains_x = np.zeros((N_ELECTRODES, N_DOFS))
    gains_f[:3] = flexor * scale
    gains_x[3:] = extensor * scale
    return SynergyModel(
        flexor_gains=gains_f,
        extensor_gains=gains_x,
        rest_noise=np.full(N_ELECTRODES, float(rest_noise)),
    )


def independent_synergy(n_dofs: int, scale: float = 110.0, rest_noise: float = 9.0) -> SynergyModel:
    """Strictly disjoint one-electrode-per-role synergy for up to 3 DOFs.

    DOF d activates electrode d when flexing and electrode 3+d when
    extending, so driving one DOF cannot excite another DOF's electrodes.
    Six electrodes only offer six such roles, hence the 3-DOF cap.
    """
    if not 1 <= n_dofs <= 3:
        raise ValueError("strictly disjoint synergies support 1..3 DOFs")
    gains_f = np.zeros((N_ELECTRODES, N_DOFS))
    gains_x = np.zeros((N_ELECTRODES, N_DOFS))
    for d in range(N_DOFS):
        gains_f[d % 3, d] = scale
        gains_x[3 + d % 3, d] = scale
    return SynergyModel(
        flexor_gains=gains_f,
        extensor_gains=gains_x,
        rest_noise=np.full(N_ELECTRODES, float(rest_noise)),
    )


def _movement_frames(dof: int, directions: tuple[int, ...], n_rise: int, n_hold: int) -> np.ndarray:
    """Trapezoid(s) for one movement: rise to +/-1, hold, fall back to 0."""
    chunks = []
    for direction in directions:
        rise = direction * np.arange(1, n_rise + 1) / n_rise
        hold = np.full(n_hold, float(direction))
        fall = direction * (1.0 - np.arange(1, n_rise + 1) / n_rise)
        chunks.append(np.concatenate([rise, hold, fall]))
    values = np.concatenate(chunks)
    frames = np.zeros((values.size, N_DOFS))
    frames[:, dof] = values
    return frames


def make_profile(schedule: MovementSchedule) -> MovementProfile:
    """Render a movement schedule into a 25-Hz trajectory.

    One DOF is active at a time; every movement is followed by a rest
    segment.  Durations are rounded to the nearest 25-Hz frame (minimum one
    frame).  Deterministic for identical schedules.
    """
    if schedule.repetitions < 0:
        raise ValueError("repetitions must be >= 0")
    for name in schedule.movements:
        if name not in _MOVEMENTS:
            raise ValueError(f"unknown movement label {name!r}")
    for field_name in ("rise_s", "hold_s", "rest_s"):
        if getattr(schedule, field_name) <= 0:
            raise ValueError(f"{field_name} must be positive")

    n_rise = max(1, round(schedule.rise_s * KINEMATIC_RATE_HZ))
    n_hold = max(1, round(schedule.hold_s * KINEMATIC_RATE_HZ))
    n_rest = max(1, round(schedule.rest_s * KINEMATIC_RATE_HZ))

    blocks: list[np.ndarray] = []
    labels: list[str] = []
    for _ in range(schedule.repetitions):
        for name in schedule.movements:
            dof, directions = _MOVEMENTS[name]
            move = _movement_frames(dof, directions, n_rise, n_hold)
            blocks.append(move)
            labels.extend([name] * move.shape[0])
            blocks.append(np.zeros((n_rest, N_DOFS)))
            labels.extend([REST_LABEL] * n_rest)

    trajectory = np.vstack(blocks) if blocks else np.zeros((0, N_DOFS))
    profile = MovementProfile(DOF_LABELS, trajectory, labels)
    profile.validate()
    return profile


def upsample_kinematics(trajectory: np.ndarray) -> np.ndarray:
    """Linearly interpolate a 25-Hz trajectory to 1 kHz.

    Frame i is anchored at t = 40*i ms; samples beyond the last anchor hold
    its value, so the output has exactly 40 samples per input frame.
    """
    n_frames = trajectory.shape[0]
    if n_frames == 0:
        return np.zeros((0, trajectory.shape[1]))
    t_frames = np.arange(n_frames) * float(SAMPLES_PER_FRAME)
    t_samples = np.arange(n_frames * SAMPLES_PER_FRAME, dtype=float)
    out = np.empty((t_samples.size, trajectory.shape[1]))
    for d in range(trajectory.shape[1]):
        out[:, d] = np.interp(t_samples, t_frames, trajectory[:, d])
    return out


def amplitude_envelope(kinematics_1khz: np.ndarray, synergy: SynergyModel) -> np.ndarray:
    """Per-electrode noise amplitude a_e(t) for a 1-kHz kinematic stream.

    a_e(t) = rest_e + sum_d gain[e, d, dir(k_d)] * |k_d(t)|, with flexor
    gains applied to positive excursions and extensor gains to negative.
    """
    pos = np.maximum(kinematics_1khz, 0.0)
    neg = np.maximum(-kinematics_1khz, 0.0)
    return synergy.rest_noise[None, :] + pos @ synergy.flexor_gains.T + neg @ synergy.extensor_gains.T


_noise_sos = signal.butter(4, NOISE_BAND_HZ, btype="bandpass", fs=SAMPLE_RATE_HZ, output="sos")


def _noise_unit_gain() -> float:
    """RMS gain of the band-limiting filter on white noise (Parseval)."""
    impulse = np.zeros(8192)
    impulse[0] = 1.0
    h = signal.sosfilt(_noise_sos, impulse)
    return float(np.sqrt(np.sum(h * h)))


_NOISE_GAIN = _noise_unit_gain()
_WARMUP_SAMPLES = 512


def band_limited_noise(n_samples: int, n_channels: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance Gaussian noise band-limited to 20-450 Hz."""
    raw = rng.standard_normal((n_samples + _WARMUP_SAMPLES, n_channels))
    shaped = signal.sosfilt(_noise_sos, raw, axis=0)[_WARMUP_SAMPLES:]
    return shaped / _NOISE_GAIN


def synthesize_emg(profile: MovementProfile, synergy: SynergyModel, seed: int) -> np.ndarray:
    """Synthesize the 1-kHz 6-electrode sample stream for a profile.

    Returns an array of shape (n_frames * 40, 6); use
    :func:`iter_electrode_frames` for a frame-by-frame view.  Bit-identical
    across runs for identical (profile, synergy, seed).
    """
    if profile.n_frames == 0:
        raise ValueError("profile is empty")
    synergy.validate()
    kin = upsample_kinematics(profile.trajectory)
    amplitude = amplitude_envelope(kin, synergy)
    rng = np.random.default_rng(seed)
    noise = band_limited_noise(kin.shape[0], N_ELECTRODES, rng)
    return amplitude * noise


def iter_electrode_frames(samples: np.ndarray, t0: int = 0) -> Iterator[ElectrodeFrame]:
    """Wrap a sample array as a stream of timestamped electrode frames."""
    for i in range(samples.shape[0]):
        yield ElectrodeFrame(t=t0 + i, samples=samples[i])
