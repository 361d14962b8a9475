"""Common forecaster contract.

Every predictor (stochastic-process baseline, autoregression, hybrid
network) is fit on training data and asked for a fixed-length horizon of
point forecasts, optionally from an explicit recent-history window so the
evaluator can roll over a test block.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator


class Forecaster(BaseEstimator):
    """fit/predict contract shared by all predictors.

    Subclasses set `multivariate` and `context_length()`: the evaluator
    slices that many trailing rows of history before each prediction and
    passes the target column only when `multivariate` is False.
    """

    multivariate = False

    def fit(self, X, y=None):
        raise NotImplementedError

    def predict(self, horizon: int, history=None) -> np.ndarray:
        """Point forecasts for steps 1..horizon after the history's end.

        With `history=None` the forecast continues from the end of the
        training data.
        """
        raise NotImplementedError

    def context_length(self) -> int:
        """Number of trailing history rows needed for a prediction."""
        raise NotImplementedError

    @property
    def loss_label(self) -> str:
        """Loss-function tag for report columns ('-' when not trainable)."""
        return "-"
