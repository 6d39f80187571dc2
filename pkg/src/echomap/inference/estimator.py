"""scikit-learn front end for the joint pipe/depth model."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .network import ModelConfig, init_model
from .train import DEFAULT_BATCH, DEFAULT_LR, predict_batches, train


class JointPipeDepthModel(ClassifierMixin, BaseEstimator):
    """Pipe classifier whose ``predict_depth`` shares the same encoder.

    ``X`` is ``(n, bands, frames)`` mel segments. Inputs are standardised by
    the training mean and standard deviation before the network sees them.
    ``depth`` passed to ``fit`` uses NaN for unlabelled samples.
    """

    def __init__(self, channels=(128, 128), kernels=(5, 3), pipe_hidden=(128,), depth_hidden=(256, 128),
                 w0=1.0, w1=1.0, learning_rate=DEFAULT_LR, batch_size=DEFAULT_BATCH, epochs=10,
                 depth_supervision="pipe", compute_dtype="float32", seed=0):
        self.channels = channels
        self.kernels = kernels
        self.pipe_hidden = pipe_hidden
        self.depth_hidden = depth_hidden
        self.w0 = w0
        self.w1 = w1
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.depth_supervision = depth_supervision
        self.compute_dtype = compute_dtype
        self.seed = seed

    def _check_X(self, X):
        X = check_array(X, allow_nd=True, ensure_2d=False, dtype=np.float64)
        if X.ndim == 2:
            X = X[None]
        if X.ndim != 3:
            raise ValueError(f"expected (n, bands, frames) segments, got shape {X.shape}")
        return X

    def fit(self, X, y, depth=None, callback=None):
        X = self._check_X(X)
        y = np.asarray(y).astype(int).reshape(-1)
        if len(y) != len(X):
            raise ValueError(f"{len(X)} segments but {len(y)} labels")
        config = ModelConfig(self.channels, self.kernels, self.pipe_hidden, self.depth_hidden, X.shape[1:])
        self.classes_ = np.array([0, 1])
        self.scale_ = (float(X.mean()), float(X.std()) or 1.0)
        model = init_model(config, self.seed)
        self.initial_model_ = model
        self.model_, self.loss_history_ = train(
            model, self._scale(X), y, depth, epochs=self.epochs, learning_rate=self.learning_rate,
            seed=self.seed, batch_size=self.batch_size, w0=self.w0, w1=self.w1,
            supervision=self.depth_supervision, dtype=np.dtype(self.compute_dtype), callback=callback,
        )
        return self

    def _scale(self, X):
        mu, sd = self.scale_
        return (X - mu) / sd

    def _forward(self, X):
        check_is_fitted(self, "model_")
        return predict_batches(self.model_, self._scale(self._check_X(X)))

    def predict_proba(self, X):
        return self._forward(X)[0]

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def predict_depth(self, X):
        return self._forward(X)[1]
