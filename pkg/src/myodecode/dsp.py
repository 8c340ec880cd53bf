"""Channel expansion, filter chains, and MAV feature extraction.

The 6 single-ended electrodes expand to 21 channels (6 originals plus the
15 lexicographically ordered differential pairs).  Two digital filter
chains model the acquisition hardware: the low-cost chain keeps only its
55-Hz high-pass edge (its 2500/3000-Hz analog edges sit above the 500-Hz
Nyquist limit of the 1-kHz stream and are treated as pass-through), while
the research-grade chain is a 4th-order 15-375 Hz band-pass cascaded with
60/120/180-Hz notches.  Features are 300-ms mean-absolute-value windows
hopped every 40 samples, i.e. 25 feature frames per second.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import signal

SAMPLE_RATE_HZ = 1000
N_ELECTRODES = 6
N_CHANNELS = 21
WINDOW_MS = 300
HOP_MS = 40

PAIR_INDICES = tuple(combinations(range(N_ELECTRODES), 2))  # 15 pairs, lexicographic

LOW_COST = "low-cost"
RESEARCH_GRADE = "research-grade"
FILTER_VARIANTS = (LOW_COST, RESEARCH_GRADE)

NOTCH_FREQS_HZ = (60.0, 120.0, 180.0)
NOTCH_Q = 30.0


@dataclass(frozen=True)
class ChannelFrame:
    """One 1-kHz sample across all 21 derived channels."""

    t: int
    channels: np.ndarray  # shape (21,)


@dataclass(frozen=True)
class FeatureFrame:
    """One 40-ms feature frame of per-channel MAV values."""

    t: int
    mav: np.ndarray  # shape (21,)
    window_ms: int = WINDOW_MS
    hop_ms: int = HOP_MS


def expand_channels(samples: np.ndarray) -> np.ndarray:
    """Expand 6 electrode samples to 21 channels.

    Channels 0-5 copy the single-ended inputs; channel 6+p holds the p-th
    differential pair (i, j), i < j, with value s_i - s_j.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (N_ELECTRODES,):
        raise ValueError(f"expected {N_ELECTRODES} electrode samples, got shape {samples.shape}")
    out = np.empty(N_CHANNELS)
    out[:N_ELECTRODES] = samples
    for p, (i, j) in enumerate(PAIR_INDICES):
        out[N_ELECTRODES + p] = samples[i] - samples[j]
    return out


def expand_batch(samples: np.ndarray) -> np.ndarray:
    """Vectorized :func:`expand_channels` over an (n, 6) sample block."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != N_ELECTRODES:
        raise ValueError("expected an (n, 6) sample block")
    out = np.empty((samples.shape[0], N_CHANNELS))
    out[:, :N_ELECTRODES] = samples
    for p, (i, j) in enumerate(PAIR_INDICES):
        out[:, N_ELECTRODES + p] = samples[:, i] - samples[:, j]
    return out


def _design_sections(variant: str) -> np.ndarray:
    if variant == LOW_COST:
        return signal.butter(2, 55.0, btype="highpass", fs=SAMPLE_RATE_HZ, output="sos")
    if variant == RESEARCH_GRADE:
        sections = [signal.butter(2, [15.0, 375.0], btype="bandpass", fs=SAMPLE_RATE_HZ, output="sos")]
        for f0 in NOTCH_FREQS_HZ:
            b, a = signal.iirnotch(f0, NOTCH_Q, fs=SAMPLE_RATE_HZ)
            sections.append(np.hstack([b, a])[None, :])
        return np.vstack(sections)
    raise ValueError(f"unknown filter variant {variant!r}")


@dataclass
class FilterModel:
    """Causal biquad cascade with independent per-channel state."""

    variant: str
    sos: np.ndarray  # (n_sections, 6)
    n_channels: int
    state: np.ndarray = field(init=False)  # (n_sections, 2, n_channels)

    def __post_init__(self):
        self.state = np.zeros((self.sos.shape[0], 2, self.n_channels))

    def reset(self) -> None:
        self.state[:] = 0.0

    def is_stable(self) -> bool:
        """All section poles strictly inside the unit circle."""
        for section in self.sos:
            poles = np.roots(section[3:])
            if np.any(np.abs(poles) >= 1.0):
                return False
        return True

    def process_block(self, block: np.ndarray) -> np.ndarray:
        """Filter an (n, n_channels) block, advancing the stored state."""
        block = np.asarray(block, dtype=float)
        if block.ndim != 2 or block.shape[1] != self.n_channels:
            raise ValueError(f"expected (n, {self.n_channels}) block, got {block.shape}")
        out, self.state = signal.sosfilt(self.sos, block, axis=0, zi=self.state)
        return out

    def process_sample(self, channels: np.ndarray) -> np.ndarray:
        """Filter a single multi-channel sample."""
        return self.process_block(np.asarray(channels, dtype=float)[None, :])[0]

    def export_coefficients(self) -> str:
        """Dump per-section b/a coefficient arrays as plain text."""
        lines = [f"# filter variant: {self.variant}", f"# sections: {self.sos.shape[0]}"]
        for idx, section in enumerate(self.sos):
            b = " ".join(f"{v:.12g}" for v in section[:3])
            a = " ".join(f"{v:.12g}" for v in section[3:])
            lines.append(f"section {idx} b: {b}")
            lines.append(f"section {idx} a: {a}")
        return "\n".join(lines) + "\n"


def make_filter(variant: str, n_channels: int = N_CHANNELS) -> FilterModel:
    """Build the digital filter chain for one acquisition variant."""
    model = FilterModel(variant=variant, sos=_design_sections(variant), n_channels=n_channels)
    if not model.is_stable():
        raise ValueError(f"{variant} filter design produced an unstable section")
    return model


def filter_frame(model: FilterModel, frame: ChannelFrame) -> ChannelFrame:
    """Apply one causal IIR step to a channel frame."""
    return ChannelFrame(t=frame.t, channels=model.process_sample(frame.channels))


class MavWindower:
    """Streaming 300-ms MAV with a 40-sample hop and zero-padded warm-up.

    Emits one feature vector per 40 input samples; windows shorter than
    300 ms of history are padded with zeros so every frame averages over
    exactly 300 samples.
    """

    def __init__(self, n_channels: int = N_CHANNELS):
        self.n_channels = n_channels
        self._buffer = np.zeros((WINDOW_MS, n_channels))
        self._pos = 0
        self._since_emit = 0

    def reset(self) -> None:
        self._buffer[:] = 0.0
        self._pos = 0
        self._since_emit = 0

    def push(self, channels: np.ndarray) -> np.ndarray | None:
        """Consume one sample; returns the MAV vector on emit ticks."""
        self._buffer[self._pos] = channels
        self._pos = (self._pos + 1) % WINDOW_MS
        self._since_emit += 1
        if self._since_emit == HOP_MS:
            self._since_emit = 0
            window = np.concatenate([self._buffer[self._pos:], self._buffer[: self._pos]], axis=0)
            return np.abs(window).sum(axis=0) / float(WINDOW_MS)
        return None

    def push_block(self, block: np.ndarray) -> list[np.ndarray]:
        """Consume a sample block, collecting any emitted feature vectors."""
        return [mav for sample in block if (mav := self.push(sample)) is not None]


def mav_stream(frames) -> list[FeatureFrame]:
    """Run the MAV windower over a stream of :class:`ChannelFrame`.

    The first feature frame is stamped 40 ms after the first sample.
    """
    windower = None
    out: list[FeatureFrame] = []
    for frame in frames:
        if windower is None:
            windower = MavWindower(n_channels=frame.channels.shape[0])
        mav = windower.push(frame.channels)
        if mav is not None:
            out.append(FeatureFrame(t=frame.t + 1, mav=mav))
    return out


def mav_batch(x: np.ndarray) -> np.ndarray:
    """Offline MAV over a full recording; matches the stream bit-for-bit.

    Returns an array of shape (floor(n / 40), n_channels).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    n_frames = n // HOP_MS
    padded = np.vstack([np.zeros((WINDOW_MS, x.shape[1])), x])
    out = np.empty((n_frames, x.shape[1]))
    for j in range(1, n_frames + 1):
        window = padded[HOP_MS * j : HOP_MS * j + WINDOW_MS]
        out[j - 1] = np.abs(window).sum(axis=0) / float(WINDOW_MS)
    return out


def estimate_baseline(features: np.ndarray, rest_mask: np.ndarray) -> np.ndarray:
    """Per-channel mean MAV over rest-labeled frames."""
    features = np.asarray(features, dtype=float)
    rest_mask = np.asarray(rest_mask, dtype=bool)
    if features.shape[0] != rest_mask.shape[0]:
        raise ValueError("feature / rest mask length mismatch")
    if not rest_mask.any():
        raise ValueError("rest mask selects no frames")
    return features[rest_mask].mean(axis=0)


def subtract_baseline(mav: np.ndarray, baseline: np.ndarray) -> np.ndarray:
    """Elementwise MAV minus baseline (result may be negative)."""
    mav = np.asarray(mav, dtype=float)
    baseline = np.asarray(baseline, dtype=float)
    if mav.shape[-1] != baseline.shape[0]:
        raise ValueError("baseline dimension mismatch")
    return mav - baseline
