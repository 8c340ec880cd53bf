"""Evaluation toolkit: SNR, intended/unintended RMSE, DOF sweeps, TOST.

SNR is the movement-period MAV divided by the rest-period MAV, per
electrode.  Decoding quality is scored as RMSE split into intended cells
(frames where a DOF's target is nonzero) and unintended cells (everything
else), after training on a random half of the session and testing on the
other half.  The equivalence statistics use a paired two one-sided t-test:
for a given alpha the minimum equivalence bounds are the tightest margins
at which each one-sided test reaches p = alpha.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import stats

from . import decoder, dsp
from .errors import NumericalError

N_DOFS = 6
_REST_EPS = 1e-12

MOVEMENT_CLASSES = ("digits", "grasp", "wrist")


@dataclass(frozen=True)
class SnrReport:
    """Per-electrode signal-to-noise ratios for one movement class."""

    movement_class: str
    values: np.ndarray  # (n_electrodes,)
    mean: float
    sd: float


@dataclass(frozen=True)
class RmseEntry:
    """Intended/unintended RMSE for one decoder evaluation.

    Either field is None when its mask partition is empty.
    """

    intended: float | None
    unintended: float | None


@dataclass(frozen=True)
class RmseReport:
    """Averaged intended/unintended RMSE over all C(6, k) DOF subsets."""

    dof_count: int
    n_subsets: int
    entries: tuple[RmseEntry, ...]
    mean_intended: float
    mean_unintended: float


@dataclass(frozen=True)
class TostResult:
    """Minimum asymmetric equivalence bounds from paired differences."""

    n: int
    mean_diff: float
    sd_diff: float
    lower_bound: float
    upper_bound: float
    alpha: float
    df: int
    t_crit: float


def snr(movement_mav: np.ndarray, rest_mav: np.ndarray, movement_class: str = "digits") -> SnrReport:
    """Elementwise movement/rest MAV ratio with cross-electrode stats."""
    movement_mav = np.asarray(movement_mav, dtype=float)
    rest_mav = np.asarray(rest_mav, dtype=float)
    if movement_mav.shape != rest_mav.shape:
        raise ValueError("movement / rest MAV shape mismatch")
    if np.any(rest_mav <= _REST_EPS):
        raise NumericalError("rest MAV is degenerate (~0); SNR undefined")
    values = movement_mav / rest_mav
    return SnrReport(
        movement_class=movement_class,
        values=values,
        mean=float(values.mean()),
        sd=float(values.std(ddof=1)) if values.size > 1 else 0.0,
    )


def session_snr(
    features: np.ndarray,
    labels: list[str],
    movement_class: str = "digits",
    movements: set[str] | None = None,
) -> SnrReport:
    """Per-electrode SNR from a recorded session's feature rows.

    Electrode MAV means are taken from the six single-ended channels over
    movement frames (optionally restricted to a movement subset) and over
    rest frames.
    """
    features = np.asarray(features, dtype=float)
    is_rest = np.array([lbl == "rest" for lbl in labels])
    is_move = ~is_rest
    if movements is not None:
        is_move &= np.array([lbl in movements for lbl in labels])
    if not is_move.any() or not is_rest.any():
        raise ValueError("session needs both movement and rest frames for SNR")
    movement_mav = features[is_move][:, :6].mean(axis=0)
    rest_mav = features[is_rest][:, :6].mean(axis=0)
    return snr(movement_mav, rest_mav, movement_class=movement_class)


def rmse(predicted: np.ndarray, actual: np.ndarray, intended_mask: np.ndarray) -> RmseEntry:
    """Masked RMSE over intended vs unintended (frame, DOF) cells."""
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    intended_mask = np.asarray(intended_mask, dtype=bool)
    if predicted.shape != actual.shape or predicted.shape != intended_mask.shape:
        raise ValueError("predicted / actual / mask shapes must match")
    sq = (predicted - actual) ** 2

    def _masked(mask: np.ndarray) -> float | None:
        if not mask.any():
            return None
        return float(np.sqrt(sq[mask].mean()))

    return RmseEntry(intended=_masked(intended_mask), unintended=_masked(~intended_mask))


def split_50_50(n_frames: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random frame-level partition into two halves (train gets the odd one).

    Returns sorted index arrays; disjoint, exhaustive, and reproducible for
    a given seed.
    """
    if n_frames < 2:
        raise ValueError("need at least 2 frames to split")
    perm = np.random.default_rng(seed).permutation(n_frames)
    n_train = n_frames - n_frames // 2
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def intended_mask(kinematics: np.ndarray) -> np.ndarray:
    """A (frame, DOF) cell is intended when its target is nonzero."""
    return np.asarray(kinematics) != 0.0


def evaluate_split(
    features: np.ndarray,
    kinematics: np.ndarray,
    rest_mask: np.ndarray,
    seed: int,
    dof_subset: tuple[int, ...] | None = None,
    dead_zone: np.ndarray | None = None,
) -> RmseEntry:
    """Train on a random half of a session and score RMSE on the other.

    The rest-MAV baseline is estimated from the training half only and
    subtracted everywhere before training and testing.
    """
    features = np.asarray(features, dtype=float)
    kinematics = np.asarray(kinematics, dtype=float)
    if dof_subset is not None:
        kinematics = kinematics[:, list(dof_subset)]
    train_idx, test_idx = split_50_50(features.shape[0], seed)
    baseline = dsp.estimate_baseline(features[train_idx], np.asarray(rest_mask, bool)[train_idx])
    model = decoder.train(
        dsp.subtract_baseline(features[train_idx], baseline),
        kinematics[train_idx],
        baseline=baseline,
        dead_zone=dead_zone,
    )
    predicted = decoder.predict_sequence(model, features[test_idx])
    actual = kinematics[test_idx]
    return rmse(predicted, actual, intended_mask(actual))


def dof_sweep(
    features: np.ndarray,
    kinematics: np.ndarray,
    rest_mask: np.ndarray,
    k: int,
    seed: int,
) -> RmseReport:
    """Evaluate every C(6, k) DOF subset on one 50/50 split and average."""
    if not 1 <= k <= N_DOFS:
        raise ValueError("k must be in 1..6")
    entries = [
        evaluate_split(features, kinematics, rest_mask, seed, dof_subset=subset)
        for subset in combinations(range(N_DOFS), k)
    ]
    intended = [e.intended for e in entries if e.intended is not None]
    unintended = [e.unintended for e in entries if e.unintended is not None]
    return RmseReport(
        dof_count=k,
        n_subsets=len(entries),
        entries=tuple(entries),
        mean_intended=float(np.mean(intended)) if intended else float("nan"),
        mean_unintended=float(np.mean(unintended)) if unintended else float("nan"),
    )


def one_sided_p(diffs: np.ndarray, margin: float, side: str) -> float:
    """One-sample one-sided t-test p-value against a margin.

    side="upper": H0 mean >= margin vs H1 mean < margin.
    side="lower": H0 mean <= margin vs H1 mean > margin.
    """
    diffs = np.asarray(diffs, dtype=float)
    n = diffs.size
    se = diffs.std(ddof=1) / np.sqrt(n)
    if se == 0.0:
        mean = diffs.mean()
        if side == "upper":
            return 0.0 if mean < margin else 1.0
        return 0.0 if mean > margin else 1.0
    tstat = (diffs.mean() - margin) / se
    if side == "upper":
        return float(stats.t.cdf(tstat, n - 1))
    if side == "lower":
        return float(stats.t.sf(tstat, n - 1))
    raise ValueError("side must be 'upper' or 'lower'")


def tost_min_bounds(diffs: np.ndarray, alpha: float = 0.05) -> TostResult:
    """Minimum equivalence interval for paired differences.

    upper = mean + t_{1-alpha, n-1} * s / sqrt(n) is the smallest margin at
    which the one-sided test of "difference >= margin" reaches p = alpha;
    the lower bound mirrors it.  Zero-variance data collapses both bounds
    onto the mean.
    """
    diffs = np.asarray(diffs, dtype=float)
    if diffs.ndim != 1 or diffs.size < 2:
        raise ValueError("need a 1-D array of at least 2 paired differences")
    if not np.all(np.isfinite(diffs)):
        raise ValueError("paired differences must be finite")
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5)")
    n = diffs.size
    mean = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    t_crit = float(stats.t.ppf(1.0 - alpha, n - 1))
    half_width = t_crit * sd / np.sqrt(n)
    return TostResult(
        n=n,
        mean_diff=mean,
        sd_diff=sd,
        lower_bound=mean - half_width,
        upper_bound=mean + half_width,
        alpha=alpha,
        df=n - 1,
        t_crit=t_crit,
    )


def percent_equivalence(bound: float, reference_mean: float) -> float:
    """Equivalence bound as a percentage of a reference mean."""
    if reference_mean == 0.0:
        raise ValueError("reference mean must be nonzero")
    return 100.0 * bound / reference_mean
