"""Metrics and signal analysis for mapping runs.

Covers the three measurement surfaces the experiments need: precision of a
learned mapping matrix against a binary ground truth, power spectra of summed
activation time series (with peak picking), and a two-sample pooled-variance
t test computed from first principles so results can be checked against an
external statistics package rather than produced by one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc


class EvaluationError(ValueError):
    pass


def _as_square(name, m):
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise EvaluationError(f"{name} must be a square matrix, got shape {arr.shape}")
    return arr


def _check_truth(truth):
    if not np.all((truth == 0.0) | (truth == 1.0)):
        raise EvaluationError("truth matrix entries must be 0 or 1")
    if not np.array_equal(truth, truth.T):
        raise EvaluationError("truth matrix must be symmetric")
    if np.any(np.diag(truth) != 0.0):
        raise EvaluationError("truth matrix diagonal must be zero")


@dataclass
class MappingMatrices:
    """A learned mapping matrix paired with the ground truth it is scored against.

    Both are n x n over the same unit ordering. The truth matrix is binary,
    symmetric, and zero on the diagonal (a unit never corresponds to itself
    across analogs in these designs). Predicted entries are weights in [0, 1]
    but any nonnegative real matrix is accepted so baselines can be scored too.
    """

    predicted: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        self.predicted = _as_square("predicted", self.predicted)
        self.truth = _as_square("truth", self.truth)
        if self.predicted.shape != self.truth.shape:
            raise EvaluationError(
                f"shape mismatch: predicted {self.predicted.shape} vs truth {self.truth.shape}"
            )
        _check_truth(self.truth)
        if np.any(self.predicted < 0.0):
            raise EvaluationError("predicted weights must be nonnegative")

    @property
    def n(self):
        return self.predicted.shape[0]


def baseline_matrix(n):
    """Uniform chance-level mapping matrix: every entry 1/n."""
    if n < 1:
        raise EvaluationError(f"need at least one unit, got n={n}")
    return np.full((n, n), 1.0 / n)


def precision(predicted, truth=None):
    """Weight-mass precision of a mapping matrix against binary truth.

    Sums predicted weight over true pairs (TP mass) and over false pairs
    (FP mass), diagonal excluded from both, and returns TP / (TP + FP).
    Returns None when the truth matrix has no positive pairs at all (the
    score is undefined, not zero), and 0.0 when the truth has positives but
    the prediction puts no mass anywhere off the diagonal.
    """
    if truth is None:
        if not isinstance(predicted, MappingMatrices):
            raise EvaluationError("precision needs (predicted, truth) or a MappingMatrices")
        pair = predicted
    else:
        pair = MappingMatrices(predicted, truth)
    off = ~np.eye(pair.n, dtype=bool)
    tp = float(pair.predicted[off & (pair.truth == 1.0)].sum())
    fp = float(pair.predicted[off & (pair.truth == 0.0)].sum())
    if not np.any(pair.truth == 1.0):
        return None
    if tp + fp == 0.0:
        return 0.0
    return tp / (tp + fp)


def summed_activation_trace(records, layers=("P", "RB", "PO")):
    """Stack per-iteration total activation by layer into plain arrays.

    records: iterable of either mappings {layer: total} or objects exposing
    layer_totals(). Returns {layer: float array over iterations}. Missing
    layers raise rather than silently filling zeros.
    """
    columns = {layer: [] for layer in layers}
    for i, rec in enumerate(records):
        totals = rec.layer_totals() if hasattr(rec, "layer_totals") else rec
        for layer in layers:
            if layer not in totals:
                raise EvaluationError(f"record {i} has no total for layer {layer!r}")
            columns[layer].append(float(totals[layer]))
    return {layer: np.asarray(vals) for layer, vals in columns.items()}


@dataclass
class SpectrumResult:
    """One-sided power spectrum with detected peaks.

    frequencies[k] in the sample_rate units, power[k] normalized so that
    sum(power) equals the summed squared deviation of the input from its
    mean (energy is preserved, not smeared by the transform convention).
    peaks lists (frequency, power) for interior local maxima at or above
    3x the median non-DC power.
    """

    frequencies: np.ndarray
    power: np.ndarray
    peaks: list = field(default_factory=list)

    def peak_frequencies(self):
        return [f for f, _ in self.peaks]


PEAK_FACTOR = 3.0
# bins this far below the spectral maximum are zero up to floating error
NOISE_FLOOR_REL = 1e-12


def power_spectrum(series, sample_rate):
    """Mean-removed one-sided power spectrum with median-threshold peak picking.

    The series is detrended by mean removal only (the DC bin is then
    structurally zero and excluded from the median that sets the peak
    threshold). Interior bins are doubled so the one-sided spectrum carries
    the full signal energy; the Nyquist bin, when present, is not doubled.
    A bin is a peak when it is an interior strict local maximum with power
    at least PEAK_FACTOR times the median and strictly positive, where
    "positive" is judged against a NOISE_FLOOR_REL fraction of the spectral
    maximum so that roundoff dust in an otherwise silent band cannot peak.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise EvaluationError(f"series must be 1-D, got shape {x.shape}")
    n = x.size
    if n < 4:
        raise EvaluationError(f"series too short for a spectrum, got {n} samples")
    if sample_rate <= 0:
        raise EvaluationError(f"sample_rate must be positive, got {sample_rate}")
    x = x - x.mean()
    spectrum = np.fft.rfft(x)
    power = np.abs(spectrum) ** 2 / n
    # one-sided: interior bins absorb their negative-frequency twins
    if n % 2 == 0:
        power[1:-1] *= 2.0
    else:
        power[1:] *= 2.0
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)

    threshold = PEAK_FACTOR * float(np.median(power[1:]))
    floor = NOISE_FLOOR_REL * float(power.max())
    peaks = []
    for k in range(1, power.size - 1):
        if power[k] <= floor:
            continue
        if power[k] > power[k - 1] and power[k] > power[k + 1] and power[k] >= threshold:
            peaks.append((float(freqs[k]), float(power[k])))
    return SpectrumResult(frequencies=freqs, power=power, peaks=peaks)


def t_test_two_sample(a, b):
    """Pooled-variance two-sample t test, two-sided.

    The statistic and p value are computed directly from the defining
    formulas: pooled variance over df = n1 + n2 - 2, and the p value via the
    regularized incomplete beta function I_{df/(df+t^2)}(df/2, 1/2), which is
    the exact two-sided tail mass of the t distribution. Degenerate cases are
    pinned: identical samples give exactly (0.0, 1.0); zero pooled variance
    with unequal means gives (+/-inf, 0.0) with the sign of the mean
    difference.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1:
        raise EvaluationError("samples must be 1-D sequences")
    n1, n2 = a.size, b.size
    if np.array_equal(a, b):
        return 0.0, 1.0
    if n1 < 2 or n2 < 2:
        raise EvaluationError(f"need at least two observations per sample, got {n1} and {n2}")
    df = n1 + n2 - 2
    mean_diff = a.mean() - b.mean()
    pooled = ((n1 - 1) * a.var(ddof=1) + (n2 - 1) * b.var(ddof=1)) / df
    if pooled == 0.0:
        if mean_diff == 0.0:
            return 0.0, 1.0
        return (np.inf if mean_diff > 0.0 else -np.inf), 0.0
    t = mean_diff / np.sqrt(pooled * (1.0 / n1 + 1.0 / n2))
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return float(t), p
