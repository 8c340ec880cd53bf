"""Kalman-filter decoder mapping MAV features to proportional kinematics.

Training follows the classic least-squares identification of a linear
dynamical system: the state transition A from consecutive kinematic pairs,
the observation matrix H from state-to-feature regression, and W/Q as the
respective residual covariances.  Decoding runs the standard discrete
predict/update recursion and then shapes the emitted output with an
optional per-DOF dead-zone followed by a hard clamp to [-1, 1]; the
internal state estimate is never clamped so the filter's error dynamics
stay unbiased.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericalError

N_FEATURES = 21

# Plain least squares falls back to ridge regularization past this
# condition number; the ridge weight scales with the Gram matrix trace.
_COND_LIMIT = 1e12
_RIDGE_FACTOR = 1e-6
_Q_EPS_FACTOR = 1e-9


@dataclass(frozen=True)
class KinematicState:
    """Decoded DOF values in [-1, 1]: -1 extension, +1 flexion, 0 rest."""

    values: np.ndarray
    dof_labels: tuple[str, ...]


@dataclass
class KalmanModel:
    """Trained decoder matrices plus the mutable filter state."""

    a: np.ndarray  # (k, k) state transition
    w: np.ndarray  # (k, k) process-noise covariance
    h: np.ndarray  # (21, k) observation matrix
    q: np.ndarray  # (21, 21) observation-noise covariance
    baseline: np.ndarray  # (21,) rest MAV subtracted from incoming features
    dof_labels: tuple[str, ...]
    dead_zone: np.ndarray = field(default=None)  # (k,) per-DOF snap-to-zero threshold
    x: np.ndarray = field(init=False)  # (k,) state estimate
    p: np.ndarray = field(init=False)  # (k, k) state covariance

    def __post_init__(self):
        if self.dead_zone is None:
            self.dead_zone = np.zeros(self.n_dofs)
        self.reset()

    @property
    def n_dofs(self) -> int:
        return self.a.shape[0]

    def reset(self) -> None:
        """Clear the filter state: x = 0, P = W."""
        self.x = np.zeros(self.n_dofs)
        self.p = self.w.copy()
        self.k_gain = np.zeros((self.n_dofs, self.h.shape[0]))  # last Kalman gain, diagnostic

    def predict_step(self, mav: np.ndarray) -> KinematicState:
        """One predict/update cycle on a raw (non-subtracted) MAV frame.

        The stored baseline is subtracted internally.  Raises
        :class:`NumericalError` with the state untouched if the innovation
        covariance cannot be inverted.
        """
        z = np.asarray(mav, dtype=float) - self.baseline
        if z.shape != (self.h.shape[0],):
            raise ValueError(f"expected {self.h.shape[0]} features, got shape {z.shape}")

        x_prior = self.a @ self.x
        p_prior = self.a @ self.p @ self.a.T + self.w
        s = self.h @ p_prior @ self.h.T + self.q
        try:
            # K = P- H^T S^-1, solved as S^T K^T = H P-^T without forming S^-1
            gain = np.linalg.solve(s.T, (p_prior @ self.h.T).T).T
        except np.linalg.LinAlgError as exc:
            raise NumericalError("innovation covariance is singular") from exc
        if not np.all(np.isfinite(gain)):
            raise NumericalError("Kalman gain is not finite")

        self.x = x_prior + gain @ (z - self.h @ x_prior)
        p = (np.eye(self.n_dofs) - gain @ self.h) @ p_prior
        self.p = (p + p.T) / 2.0
        self.k_gain = gain
        return KinematicState(values=self._shape_output(self.x), dof_labels=self.dof_labels)

    def _shape_output(self, x: np.ndarray) -> np.ndarray:
        out = x.copy()
        out[np.abs(out) < self.dead_zone] = 0.0
        return np.clip(out, -1.0, 1.0)

    def clone(self) -> "KalmanModel":
        """Independent copy for parallel evaluation; state is reset."""
        return KalmanModel(
            a=self.a.copy(),
            w=self.w.copy(),
            h=self.h.copy(),
            q=self.q.copy(),
            baseline=self.baseline.copy(),
            dof_labels=self.dof_labels,
            dead_zone=self.dead_zone.copy(),
        )


def _solve_regression(targets: np.ndarray, regressors: np.ndarray, ridge: float | None) -> np.ndarray:
    """Least-squares fit of targets ~ coeff @ regressors (rows = time).

    Solves coeff = (T^T R)(R^T R)^-1, switching to ridge when the normal
    equations are near-singular.  ``ridge`` of None means auto.
    """
    gram = regressors.T @ regressors
    cross = targets.T @ regressors
    dim = gram.shape[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        if ridge is None:
            cond = np.linalg.cond(gram)
            if np.isfinite(cond) and cond < _COND_LIMIT:
                return np.linalg.solve(gram.T, cross.T).T
            ridge = _RIDGE_FACTOR * np.trace(gram) / dim
        gram_r = gram + ridge * np.eye(dim)
        cond_r = np.linalg.cond(gram_r)
    if ridge <= 0 or not np.isfinite(cond_r) or cond_r >= _COND_LIMIT:
        raise NumericalError("normal equations are singular and ridge fallback failed")
    return np.linalg.solve(gram_r.T, cross.T).T


def train(
    features: np.ndarray,
    kinematics: np.ndarray,
    dof_labels: tuple[str, ...] | None = None,
    baseline: np.ndarray | None = None,
    dead_zone: np.ndarray | None = None,
    ridge: float | None = None,
) -> KalmanModel:
    """Fit decoder matrices from aligned feature/kinematic sequences.

    ``features`` (n, 21) must already be baseline-subtracted; pass the
    baseline that was removed so the model can apply it at run time.
    ``kinematics`` (n, k) must lie in [-1, 1].  Deterministic: identical
    data yields identical parameters.
    """
    z = np.asarray(features, dtype=float)
    x = np.asarray(kinematics, dtype=float)
    if z.ndim != 2 or x.ndim != 2:
        raise ValueError("features and kinematics must be 2-D (time, dim)")
    if z.shape[0] != x.shape[0]:
        raise ValueError("feature / kinematic sequence length mismatch")
    k = x.shape[1]
    if z.shape[0] < 10 * (k + z.shape[1]):
        raise ValueError(f"need at least {10 * (k + z.shape[1])} aligned frames, got {z.shape[0]}")
    if np.max(np.abs(x), initial=0.0) > 1.0 + 1e-9:
        raise ValueError("kinematics must lie in [-1, 1]")

    n = x.shape[0]
    x_now, x_next = x[:-1], x[1:]
    a = _solve_regression(x_next, x_now, ridge)
    resid_a = x_next - x_now @ a.T
    w = resid_a.T @ resid_a / (n - 1)

    h = _solve_regression(z, x, ridge)
    resid_h = z - x @ h.T
    q = resid_h.T @ resid_h / n
    q_trace = np.trace(q)
    eps = _Q_EPS_FACTOR * q_trace / q.shape[0] if q_trace > 0 else 1e-12
    q = q + eps * np.eye(q.shape[0])

    if dof_labels is None:
        dof_labels = tuple(f"dof{i}" for i in range(k))
    if baseline is None:
        baseline = np.zeros(z.shape[1])
    return KalmanModel(
        a=a,
        w=(w + w.T) / 2.0,
        h=h,
        q=(q + q.T) / 2.0,
        baseline=np.asarray(baseline, dtype=float).copy(),
        dof_labels=tuple(dof_labels),
        dead_zone=None if dead_zone is None else np.asarray(dead_zone, dtype=float).copy(),
    )


def predict_sequence(model: KalmanModel, features: np.ndarray, reset: bool = True) -> np.ndarray:
    """Decode a feature sequence frame by frame; returns (n, k) outputs."""
    if reset:
        model.reset()
    out = np.empty((features.shape[0], model.n_dofs))
    for i, frame in enumerate(features):
        out[i] = model.predict_step(frame).values
    return out


_MATRIX_FIELDS = ("a", "w", "h", "q")
_VECTOR_FIELDS = ("baseline", "dead_zone")


def save_model(model: KalmanModel, path: str | Path) -> None:
    """Plain-text model dump: dimension headers + row-major 12-digit values."""
    lines = ["myodecode-kalman v1", f"dof_labels {' '.join(model.dof_labels)}"]
    for name in _MATRIX_FIELDS:
        m = getattr(model, name)
        lines.append(f"{name} {m.shape[0]} {m.shape[1]}")
        lines.extend(" ".join(f"{v:.12g}" for v in row) for row in m)
    for name in _VECTOR_FIELDS:
        v = getattr(model, name)
        lines.append(f"{name} {v.shape[0]}")
        lines.append(" ".join(f"{x:.12g}" for x in v))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_model(path: str | Path) -> KalmanModel:
    """Load a model written by :func:`save_model`."""
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines or lines[0] != "myodecode-kalman v1":
        raise ValueError(f"{path}: not a myodecode model file")
    if not lines[1].startswith("dof_labels "):
        raise ValueError(f"{path}: missing dof_labels header")
    dof_labels = tuple(lines[1].split()[1:])
    pos = 2
    fields: dict[str, np.ndarray] = {}
    for name in _MATRIX_FIELDS:
        header = lines[pos].split()
        if header[0] != name:
            raise ValueError(f"{path}: expected matrix {name!r}, found {header[0]!r}")
        rows, cols = int(header[1]), int(header[2])
        block = [list(map(float, lines[pos + 1 + r].split())) for r in range(rows)]
        fields[name] = np.array(block).reshape(rows, cols)
        pos += 1 + rows
    for name in _VECTOR_FIELDS:
        header = lines[pos].split()
        if header[0] != name:
            raise ValueError(f"{path}: expected vector {name!r}, found {header[0]!r}")
        fields[name] = np.array(list(map(float, lines[pos + 1].split())))
        pos += 2
    return KalmanModel(
        a=fields["a"],
        w=fields["w"],
        h=fields["h"],
        q=fields["q"],
        baseline=fields["baseline"],
        dof_labels=dof_labels,
        dead_zone=fields["dead_zone"],
    )
