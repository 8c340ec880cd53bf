"""Session persistence: 25-Hz CSV logs plus an optional full-rate sidecar.

Schema (bit-exact), one row per feature frame:

    t_ms,raw0..raw5,mav0..mav20,kin0..kin5,label

* ``t_ms``: integer milliseconds, strictly increasing by 40, at most
  999,999 per file (longer recordings span multiple files).
* ``raw0..raw5``: the most recent 10-bit ADC sample per electrode (0-1023).
  Logging the latest sample instead of the full 1-kHz stream is what keeps
  the data rate inside the 32-GB / 108,000-minute budget; full-rate capture
  goes to the binary ``.emgraw`` sidecar, which is excluded from it.
* ``mav0..mav20``: per-channel MAV in ADC counts, rounded to integers
  (0-9999).  Integer quantization keeps the worst-case row at 195 bytes,
  i.e. 292.5 kB/min of the 296.3 kB/min budget.
* ``kin0..kin5``: DOF targets, fixed 4-decimal text in [-1, 1].
* ``label``: segment code of at most 4 characters (see
  :data:`myodecode.synth.LABEL_CODES`).

Metadata (session id, seed, electrode count, DOF labels, filter variant)
rides in ``#``-prefixed lines above the column header.  Files use LF line
endings and ASCII text throughout.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .synth import CODE_LABELS, DOF_LABELS, LABEL_CODES, REST_LABEL

N_ELECTRODES = 6
N_CHANNELS = 21
N_DOFS = 6
ROWS_PER_MIN = 25 * 60

MAGIC = "# myodecode-session v1"
COLUMNS = (
    ["t_ms"]
    + [f"raw{i}" for i in range(N_ELECTRODES)]
    + [f"mav{i}" for i in range(N_CHANNELS)]
    + [f"kin{i}" for i in range(N_DOFS)]
    + ["label"]
)
HEADER_LINE = ",".join(COLUMNS)
N_COLUMNS = len(COLUMNS)  # 35

T_MS_MAX = 999_999
RAW_MAX = 1023
MAV_MAX = 9999
SESSION_ID_MAX = 32
LABEL_CODE_MAX = 4

# Worst-case widths: t_ms 6, raw 4, mav 4, kin 7 ("-1.0000"), label 4,
# 34 commas, 1 LF.
WORST_ROW_BYTES = 6 + 6 * 4 + 21 * 4 + 6 * 7 + LABEL_CODE_MAX + (N_COLUMNS - 1) + 1

SIDECAR_MAGIC = b"EMGRAW1\n"
SIDECAR_SUFFIX = ".emgraw"

_KIN_RE = re.compile(r"-?[01]\.\d{4}")


def quantize_kin(values: np.ndarray) -> np.ndarray:
    """Round kinematics to the 4-decimal grid the CSV text carries."""
    flat = np.asarray(values, dtype=float).ravel()
    q = np.array([float(f"{v:.4f}") + 0.0 for v in flat])
    return q.reshape(np.shape(values))


@dataclass
class SessionLog:
    """In-memory image of one session file (already quantized)."""

    session_id: str
    seed: int
    filter_variant: str
    dof_labels: tuple[str, ...]
    t_ms: np.ndarray  # (n,) int
    raw: np.ndarray  # (n, 6) int
    mav: np.ndarray  # (n, 21) int
    kin: np.ndarray  # (n, 6) float, 4-decimal grid
    labels: list[str]  # full segment names
    n_electrodes: int = N_ELECTRODES

    @property
    def n_frames(self) -> int:
        return int(self.t_ms.shape[0])

    def rest_mask(self) -> np.ndarray:
        return np.array([lbl == REST_LABEL for lbl in self.labels], dtype=bool)

    def validate(self) -> None:
        n = self.n_frames
        if len(self.session_id) > SESSION_ID_MAX or not self.session_id.isascii():
            raise ValueError("session id must be ASCII, at most 32 chars")
        if any(c in self.session_id for c in ",\n\r"):
            raise ValueError("session id must not contain commas or newlines")
        if self.dof_labels != DOF_LABELS:
            raise ValueError("session must carry the canonical 6 DOF labels")
        shapes = (self.raw.shape, self.mav.shape, self.kin.shape, (len(self.labels),))
        if shapes != ((n, N_ELECTRODES), (n, N_CHANNELS), (n, N_DOFS), (n,)):
            raise ValueError("session column blocks have inconsistent lengths")
        if n == 0:
            return
        if self.t_ms[0] < 0 or self.t_ms[-1] > T_MS_MAX:
            raise ValueError("timestamps must lie in [0, 999999] ms")
        if np.any(np.diff(self.t_ms) != 40):
            raise ValueError("timestamps must increase by exactly 40 ms")
        if np.any(self.raw < 0) or np.any(self.raw > RAW_MAX):
            raise ValueError("raw values must lie in 0..1023")
        if np.any(self.mav < 0) or np.any(self.mav > MAV_MAX):
            raise ValueError("MAV values must lie in 0..9999")
        if np.any(np.abs(self.kin) > 1.0):
            raise ValueError("kinematics must lie in [-1, 1]")
        for lbl in self.labels:
            if lbl not in LABEL_CODES:
                raise ValueError(f"unknown segment label {lbl!r}")

    def equals(self, other: "SessionLog") -> bool:
        return (
            self.session_id == other.session_id
            and self.seed == other.seed
            and self.filter_variant == other.filter_variant
            and self.dof_labels == other.dof_labels
            and np.array_equal(self.t_ms, other.t_ms)
            and np.array_equal(self.raw, other.raw)
            and np.array_equal(self.mav, other.mav)
            and np.array_equal(self.kin, other.kin)
            and self.labels == other.labels
        )


def _render(log: SessionLog) -> bytes:
    log.validate()
    out = io.StringIO()
    out.write(MAGIC + "\n")
    out.write(f"# session_id={log.session_id}\n")
    out.write(f"# seed={log.seed}\n")
    out.write(f"# electrodes={log.n_electrodes}\n")
    out.write(f"# dof_labels={','.join(log.dof_labels)}\n")
    out.write(f"# filter={log.filter_variant}\n")
    out.write(HEADER_LINE + "\n")
    for i in range(log.n_frames):
        fields = [str(int(log.t_ms[i]))]
        fields += [str(int(v)) for v in log.raw[i]]
        fields += [str(int(v)) for v in log.mav[i]]
        fields += [f"{v:.4f}" for v in log.kin[i]]
        fields.append(LABEL_CODES[log.labels[i]])
        out.write(",".join(fields) + "\n")
    return out.getvalue().encode("ascii")


def write_session(log: SessionLog, destination: str | Path) -> int:
    """Write a session CSV; returns the exact byte count written."""
    payload = _render(log)
    Path(destination).write_bytes(payload)
    return len(payload)


def _parse_metadata(lines: list[str]) -> tuple[dict[str, str], int]:
    if not lines or lines[0] != MAGIC:
        raise SchemaError("missing myodecode-session magic line", line=1)
    meta: dict[str, str] = {}
    idx = 1
    while idx < len(lines) and lines[idx].startswith("# "):
        key, sep, value = lines[idx][2:].partition("=")
        if not sep:
            raise SchemaError(f"malformed metadata line {lines[idx]!r}", line=idx + 1)
        meta[key] = value
        idx += 1
    if idx >= len(lines) or lines[idx] != HEADER_LINE:
        raise SchemaError("missing or wrong column header line", line=idx + 1)
    for key in ("session_id", "seed", "electrodes", "dof_labels", "filter"):
        if key not in meta:
            raise SchemaError(f"metadata key {key!r} missing")
    return meta, idx + 1


def _parse_int(text: str, lo: int, hi: int, what: str, line: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise SchemaError(f"{what} value {text!r} is not an integer", line=line) from None
    if str(value) != text:
        raise SchemaError(f"{what} value {text!r} is not canonical decimal", line=line)
    if not lo <= value <= hi:
        raise SchemaError(f"{what} value {value} outside {lo}..{hi}", line=line)
    return value


def read_session(source: str | Path) -> SessionLog:
    """Parse and validate a session CSV; malformed rows name their line."""
    text = Path(source).read_bytes().decode("ascii", errors="strict")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    meta, first_row = _parse_metadata(lines)
    dof_labels = tuple(meta["dof_labels"].split(","))

    n = len(lines) - first_row
    t_ms = np.empty(n, dtype=int)
    raw = np.empty((n, N_ELECTRODES), dtype=int)
    mav = np.empty((n, N_CHANNELS), dtype=int)
    kin = np.empty((n, N_DOFS), dtype=float)
    labels: list[str] = []
    prev_t = None
    for r in range(n):
        line_no = first_row + r + 1
        fields = lines[first_row + r].split(",")
        if len(fields) != N_COLUMNS:
            raise SchemaError(f"expected {N_COLUMNS} columns, found {len(fields)}", line=line_no)
        t = _parse_int(fields[0], 0, T_MS_MAX, "t_ms", line_no)
        if prev_t is not None and t != prev_t + 40:
            raise SchemaError(f"timestamp {t} does not follow {prev_t} by 40 ms", line=line_no)
        prev_t = t
        t_ms[r] = t
        for e in range(N_ELECTRODES):
            raw[r, e] = _parse_int(fields[1 + e], 0, RAW_MAX, f"raw{e}", line_no)
        for c in range(N_CHANNELS):
            mav[r, c] = _parse_int(fields[7 + c], 0, MAV_MAX, f"mav{c}", line_no)
        for d in range(N_DOFS):
            text = fields[28 + d]
            if not _KIN_RE.fullmatch(text):
                raise SchemaError(f"kin{d} value {text!r} is not fixed 4-decimal text", line=line_no)
            v = float(text)
            if abs(v) > 1.0:
                raise SchemaError(f"kin{d} value {text!r} outside [-1, 1]", line=line_no)
            kin[r, d] = v + 0.0
        code = fields[34]
        if code not in CODE_LABELS:
            raise SchemaError(f"unknown segment label code {code!r}", line=line_no)
        labels.append(CODE_LABELS[code])

    log = SessionLog(
        session_id=meta["session_id"],
        seed=int(meta["seed"]),
        filter_variant=meta["filter"],
        dof_labels=dof_labels,
        t_ms=t_ms,
        raw=raw,
        mav=mav,
        kin=kin,
        labels=labels,
        n_electrodes=int(meta["electrodes"]),
    )
    try:
        log.validate()
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    return log


def header_bytes(session_id: str = "x" * SESSION_ID_MAX, seed: int = 2**32 - 1) -> int:
    """Byte count of a worst-width header block (metadata + column line)."""
    empty = SessionLog(
        session_id=session_id,
        seed=seed,
        filter_variant="research-grade",
        dof_labels=DOF_LABELS,
        t_ms=np.empty(0, dtype=int),
        raw=np.empty((0, N_ELECTRODES), dtype=int),
        mav=np.empty((0, N_CHANNELS), dtype=int),
        kin=np.empty((0, N_DOFS)),
        labels=[],
    )
    return len(_render(empty))


def storage_estimate(minutes: float) -> int:
    """Worst-case bytes for a recording of the given length.

    Linear model: worst-width header plus WORST_ROW_BYTES per 40-ms row at
    25 rows/s.  Recordings longer than one file's timestamp range are
    assumed to span multiple files of the same schema.
    """
    if minutes < 0:
        raise ValueError("minutes must be >= 0")
    return header_bytes() + int(round(ROWS_PER_MIN * minutes)) * WORST_ROW_BYTES


def worst_width_session(minutes: float, session_id: str = "x" * SESSION_ID_MAX) -> SessionLog:
    """Session whose every field renders at its maximum textual width."""
    n = int(round(ROWS_PER_MIN * minutes))
    if n * 40 > T_MS_MAX + 1:
        raise ValueError("a single session file holds at most ~16.6 minutes")
    widest_label = "D1-flex/ext"  # code "D1fe", 4 chars: the widest movement code
    # anchor timestamps at the top of the range so t_ms renders at 6 digits
    t_last = T_MS_MAX // 40 * 40
    return SessionLog(
        session_id=session_id,
        seed=2**32 - 1,
        filter_variant="research-grade",
        dof_labels=DOF_LABELS,
        t_ms=t_last - 40 * np.arange(n - 1, -1, -1),
        raw=np.full((n, N_ELECTRODES), RAW_MAX, dtype=int),
        mav=np.full((n, N_CHANNELS), MAV_MAX, dtype=int),
        kin=np.full((n, N_DOFS), -1.0),
        labels=[widest_label] * n,
    )


def sidecar_path(csv_path: str | Path) -> Path:
    """Conventional location of the full-rate raw stream next to a CSV."""
    return Path(csv_path).with_suffix(SIDECAR_SUFFIX)


def write_sidecar(path: str | Path, adc_samples: np.ndarray) -> int:
    """Write the full-rate ADC stream as little-endian uint16 rows."""
    adc_samples = np.asarray(adc_samples)
    if adc_samples.ndim != 2 or adc_samples.shape[1] != N_ELECTRODES:
        raise ValueError("expected an (n, 6) ADC sample array")
    if adc_samples.min(initial=0) < 0 or adc_samples.max(initial=0) > RAW_MAX:
        raise ValueError("ADC samples must lie in 0..1023")
    header = f"channels={N_ELECTRODES} fs=1000 n={adc_samples.shape[0]}\n".encode("ascii")
    payload = SIDECAR_MAGIC + header + adc_samples.astype("<u2").tobytes(order="C")
    Path(path).write_bytes(payload)
    return len(payload)


def read_sidecar(path: str | Path) -> np.ndarray:
    """Read a full-rate ADC stream written by :func:`write_sidecar`."""
    blob = Path(path).read_bytes()
    if not blob.startswith(SIDECAR_MAGIC):
        raise SchemaError(f"{path}: not an EMGRAW1 sidecar")
    header_end = blob.index(b"\n", len(SIDECAR_MAGIC))
    fields = dict(
        part.split("=") for part in blob[len(SIDECAR_MAGIC) : header_end].decode("ascii").split()
    )
    n = int(fields["n"])
    data = np.frombuffer(blob[header_end + 1 :], dtype="<u2")
    if data.size != n * N_ELECTRODES:
        raise SchemaError(f"{path}: sidecar payload size mismatch")
    return data.reshape(n, N_ELECTRODES).astype(np.int64)
