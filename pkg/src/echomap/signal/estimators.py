"""scikit-learn wrappers so the spectral features drop into pipelines."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .mel import SEGMENT_HOP, mel_segments
from .spectral import classify_region, dft, fd, psd
from .types import RegionLabel, SignalOfInterest


def _as_sois(X, sample_rate):
    if len(X) and isinstance(X[0], SignalOfInterest):
        return list(X)
    X = check_array(X, ensure_2d=True)
    times = np.arange(X.shape[1]) / sample_rate
    return [SignalOfInterest(times, row, 0.0, sample_rate) for row in X]


class FrequencyDensityFeatures(TransformerMixin, BaseEstimator):
    """Map SOIs (or equal-length sample windows, one per row) to ``[fd, psd]``."""

    def __init__(self, sample_rate=44100.0):
        self.sample_rate = sample_rate

    def fit(self, X, y=None):
        self.n_features_out_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_out_")
        rows = []
        for soi in _as_sois(X, self.sample_rate):
            spectrum = dft(soi)
            rows.append([fd(spectrum), psd(spectrum)])
        return np.asarray(rows, dtype=float).reshape(-1, 2)

    def get_feature_names_out(self, input_features=None):
        return np.array(["fd", "psd"], dtype=object)


class MelSegmenter(TransformerMixin, BaseEstimator):
    """Map each SOI to its first 60x41 log-mel segment; output ``(n, 60, 41)``."""

    def __init__(self, sample_rate=44100.0, segment_hop=SEGMENT_HOP):
        self.sample_rate = sample_rate
        self.segment_hop = segment_hop

    def fit(self, X, y=None):
        self.fitted_ = True
        return self

    def transform(self, X):
        check_is_fitted(self, "fitted_")
        out = []
        for k, soi in enumerate(_as_sois(X, self.sample_rate)):
            segments = mel_segments(soi, segment_hop=self.segment_hop)
            if not segments:
                raise ValueError(f"SOI {k} is too short for a mel segment")
            out.append(segments[0].values)
        return np.stack(out)


class FdRegionClassifier(ClassifierMixin, BaseEstimator):
    """Threshold classifier on FD: below the threshold means a buried object.

    ``fit`` places the threshold at the midpoint of the two class means of
    the training FD values (label 1 = subsurface object) unless a fixed
    ``threshold`` is given.
    """

    def __init__(self, threshold=None):
        self.threshold = threshold

    def fit(self, X, y):
        fd_values = check_array(np.asarray(X, dtype=float).reshape(len(X), -1))[:, 0]
        y = np.asarray(y).astype(int)
        self.classes_ = np.array([0, 1])
        if self.threshold is not None:
            self.threshold_ = float(self.threshold)
        else:
            if not (np.any(y == 0) and np.any(y == 1)):
                raise ValueError("both classes are needed to place the threshold")
            self.threshold_ = 0.5 * (fd_values[y == 0].mean() + fd_values[y == 1].mean())
        return self

    def predict(self, X):
        check_is_fitted(self, "threshold_")
        fd_values = np.asarray(X, dtype=float).reshape(len(X), -1)[:, 0]
        return np.array(
            [int(classify_region(v, self.threshold_) is RegionLabel.SUBSURFACE_OBJECT) for v in fd_values]
        )
