"""Soft-real-time orchestration of the decode chain.

A 1-kHz sample source (synthetic or sidecar replay) feeds the
expand -> filter -> MAV -> baseline-subtract -> Kalman chain on a fixed
40-ms control cadence.  Correctness is defined in stream time (sample
counts), so the deterministic mode is bit-reproducible and must match the
offline batch composition of the same operations; wall-clock pacing is an
optional mode used for latency benchmarking only.

Exactly two logical stages exist: a producer pushing electrode samples
into one bounded single-producer single-consumer queue, and a consumer
running the DSP + decoder chain.  The queue drops its oldest samples on
overflow (a control loop prefers fresh data), and every drop is counted in
the timing report.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import datastore, decoder, dsp, synth

UPDATE_PERIOD_MS = 40
ADC_MIDSCALE = 512
MIN_QUEUE_CAPACITY = 2 * UPDATE_PERIOD_MS


@dataclass(frozen=True)
class TimingReport:
    """Per-cycle compute latencies with deadline and drop accounting."""

    latencies_ms: np.ndarray
    deadline_ms: float
    dropped_sample_count: int

    @property
    def n_cycles(self) -> int:
        return int(self.latencies_ms.size)

    @property
    def missed_deadline_count(self) -> int:
        return int(np.sum(self.latencies_ms > self.deadline_ms))

    @property
    def mean(self) -> float:
        return float(self.latencies_ms.mean()) if self.n_cycles else 0.0

    @property
    def max(self) -> float:
        return float(self.latencies_ms.max()) if self.n_cycles else 0.0

    def percentile(self, q: float) -> float:
        """Nearest-rank order statistic: smallest latency covering q%."""
        if not self.n_cycles:
            return 0.0
        ranked = np.sort(self.latencies_ms)
        idx = max(0, int(np.ceil(q / 100.0 * self.n_cycles)) - 1)
        return float(ranked[min(idx, self.n_cycles - 1)])

    def to_text(self) -> str:
        lines = [
            f"cycles: {self.n_cycles}",
            f"mean_ms: {self.mean:.4f}",
            f"p50_ms: {self.percentile(50):.4f}",
            f"p99_ms: {self.percentile(99):.4f}",
            f"max_ms: {self.max:.4f}",
            f"missed_deadlines: {self.missed_deadline_count}",
            f"dropped_samples: {self.dropped_sample_count}",
        ]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DecodedTrace:
    """25-Hz decoded kinematics, one row per control cycle."""

    t_ms: np.ndarray
    values: np.ndarray  # (n_cycles, k)
    dof_labels: tuple[str, ...]

    def write_csv(self, path: str | Path) -> int:
        header = "t_ms," + ",".join(f"kin{i}" for i in range(self.values.shape[1]))
        lines = [header]
        for t, row in zip(self.t_ms, self.values):
            lines.append(f"{int(t)}," + ",".join(f"{v:.4f}" for v in row))
        payload = ("\n".join(lines) + "\n").encode("ascii")
        Path(path).write_bytes(payload)
        return len(payload)


class BoundedSampleQueue:
    """Bounded SPSC queue over electrode samples; overflow drops oldest."""

    def __init__(self, capacity: int):
        if capacity < MIN_QUEUE_CAPACITY:
            raise ValueError(f"queue capacity must be >= {MIN_QUEUE_CAPACITY} samples")
        self.capacity = capacity
        self._items: list[np.ndarray] = []
        self._lock = threading.Lock()
        self._not_empty = threading.Condition(self._lock)
        self.dropped = 0
        self._closed = False

    def put_block(self, block: np.ndarray) -> None:
        with self._not_empty:
            for sample in block:
                if len(self._items) >= self.capacity:
                    self._items.pop(0)
                    self.dropped += 1
                self._items.append(sample)
            self._not_empty.notify()

    def close(self) -> None:
        with self._not_empty:
            self._closed = True
            self._not_empty.notify()

    def get_block(self, n: int) -> np.ndarray | None:
        """Pop the n oldest samples, waiting if needed; None once drained."""
        with self._not_empty:
            while len(self._items) < n and not self._closed:
                self._not_empty.wait()
            if len(self._items) < n:
                return None
            out = np.array(self._items[:n])
            del self._items[:n]
            return out


@dataclass
class PipelineConfig:
    """Everything run_pipeline needs: source, chain variant, decoder."""

    source: np.ndarray  # (n, 6) ADC samples
    model: decoder.KalmanModel
    filter_variant: str = dsp.LOW_COST
    update_period_ms: int = UPDATE_PERIOD_MS
    queue_capacity: int = 1000
    paced: bool = False

    def __post_init__(self):
        if self.update_period_ms != UPDATE_PERIOD_MS:
            raise ValueError("the control cadence is fixed at 40 ms")


def adc_quantize(samples: np.ndarray) -> np.ndarray:
    """Map dimensionless synthesizer output onto 10-bit ADC counts."""
    counts = np.rint(ADC_MIDSCALE + np.asarray(samples, dtype=float))
    return np.clip(counts, 0, datastore.RAW_MAX).astype(np.int64)


def synthetic_source(profile: synth.MovementProfile, synergy: synth.SynergyModel, seed: int) -> np.ndarray:
    """Synthesize a profile and quantize it to the ADC sample domain."""
    return adc_quantize(synth.synthesize_emg(profile, synergy, seed))


def replay_source(session_csv: str | Path) -> np.ndarray:
    """Load the full-rate ADC stream recorded next to a session CSV."""
    return datastore.read_sidecar(datastore.sidecar_path(session_csv))


def _consume_block(
    block: np.ndarray,
    filt: dsp.FilterModel,
    windower: dsp.MavWindower,
    model: decoder.KalmanModel,
) -> np.ndarray:
    channels = dsp.expand_batch(block.astype(float))
    filtered = filt.process_block(channels)
    frames = windower.push_block(filtered)
    if len(frames) != 1:
        raise RuntimeError("one 40-sample block must yield exactly one feature frame")
    return model.predict_step(frames[0]).values


def run_pipeline(config: PipelineConfig) -> tuple[DecodedTrace, TimingReport]:
    """Run the full chain over the source on the 40-ms cadence.

    Deterministic (unpaced) mode interleaves producer and consumer in one
    thread, so the decoded trace depends only on the samples.  Paced mode
    runs the producer in its own thread on a wall-clock schedule and
    reports compute-only latency per cycle.
    """
    n_cycles = config.source.shape[0] // UPDATE_PERIOD_MS
    queue = BoundedSampleQueue(config.queue_capacity)
    filt = dsp.make_filter(config.filter_variant)
    windower = dsp.MavWindower()
    model = config.model
    model.reset()

    outputs = np.empty((n_cycles, model.n_dofs))
    latencies = np.empty(n_cycles)

    def produce_cycle(c: int) -> None:
        queue.put_block(config.source[c * UPDATE_PERIOD_MS : (c + 1) * UPDATE_PERIOD_MS])

    if config.paced:
        def producer() -> None:
            t0 = time.perf_counter()
            for c in range(n_cycles):
                target = t0 + (c + 1) * UPDATE_PERIOD_MS / 1000.0
                while True:
                    now = time.perf_counter()
                    if now >= target:
                        break
                    time.sleep(min(target - now, 0.005))
                produce_cycle(c)
            queue.close()

        thread = threading.Thread(target=producer, name="emg-producer", daemon=True)
        thread.start()
    else:
        thread = None

    done = 0
    for c in range(n_cycles):
        if thread is None:
            produce_cycle(c)
        block = queue.get_block(UPDATE_PERIOD_MS)
        if block is None:
            break  # source exhausted (possible under drops in paced mode)
        start = time.perf_counter()
        outputs[done] = _consume_block(block, filt, windower, model)
        latencies[done] = (time.perf_counter() - start) * 1000.0
        done += 1
    if thread is not None:
        thread.join()

    t_ms = UPDATE_PERIOD_MS * np.arange(1, done + 1)
    trace = DecodedTrace(t_ms=t_ms, values=outputs[:done], dof_labels=model.dof_labels)
    report = TimingReport(
        latencies_ms=latencies[:done],
        deadline_ms=float(UPDATE_PERIOD_MS),
        dropped_sample_count=queue.dropped,
    )
    return trace, report


def record_training_session(
    profile: synth.MovementProfile,
    synergy: synth.SynergyModel,
    filter_variant: str,
    seed: int,
    destination: str | Path | None = None,
    session_id: str | None = None,
    sidecar: bool = True,
) -> datastore.SessionLog:
    """Synthesize a profile and log the synchronized 25-Hz session rows.

    Each row carries the last raw ADC sample of its 40-ms block, the
    integer-quantized MAV feature vector, and the profile's kinematic
    targets.  Writes the CSV (and, by default, the full-rate sidecar used
    for replay) when a destination is given.  Byte-identical across runs
    for identical arguments.
    """
    adc = synthetic_source(profile, synergy, seed)
    filt = dsp.make_filter(filter_variant)
    filtered = filt.process_block(dsp.expand_batch(adc.astype(float)))
    mav = dsp.mav_batch(filtered)
    n = mav.shape[0]

    mav_int = np.rint(mav).astype(np.int64)
    if np.any(mav_int > datastore.MAV_MAX):
        raise ValueError("MAV exceeds the schema's 4-digit range; lower the synergy gains")
    log = datastore.SessionLog(
        session_id=session_id if session_id is not None else f"synth-{seed}",
        seed=seed,
        filter_variant=filter_variant,
        dof_labels=profile.dof_labels,
        t_ms=UPDATE_PERIOD_MS * np.arange(1, n + 1),
        raw=adc[UPDATE_PERIOD_MS * np.arange(1, n + 1) - 1],
        mav=mav_int,
        kin=datastore.quantize_kin(profile.trajectory[:n]),
        labels=list(profile.segment_labels[:n]),
    )
    log.validate()
    if destination is not None:
        datastore.write_session(log, destination)
        if sidecar:
            datastore.write_sidecar(datastore.sidecar_path(destination), adc)
    return log
