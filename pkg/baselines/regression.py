"""
Multivariate linear regression via ridge-jittered normal equations, and the
angle between two per-plot vectors.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from core.exceptions import DataError, ShapeError, SingularFitError

logger = logging.getLogger(__name__)

RIDGE = 1e-8


@dataclass
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    feature_names: list = field(default_factory=list)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if self.feature_names and len(self.feature_names) != len(self.coefficients):
            raise ShapeError(f"{len(self.coefficients)} coefficients for "
                             f"{len(self.feature_names)} feature names")

    def to_dict(self):
        return {
            'coefficients': self.coefficients.tolist(),
            'intercept': self.intercept,
            'feature_names': list(self.feature_names),
        }


def mlr_fit(X, y, feature_names=None, ridge=RIDGE):
    """
    Least squares y ~ X b + c.

    Columns are standardized before solving (AᵀA + ridge·I) b = Aᵀy; the
    intercept is not penalized. A design matrix whose rank is below its column
    count (intercept included) raises SingularFitError.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2:
        raise ShapeError(f"feature matrix must be 2-D, got shape {X.shape}")
    rows, cols = X.shape
    if y.size != rows:
        raise ShapeError(f"{rows} feature rows for {y.size} targets")
    if rows < cols + 1:
        raise DataError(f"need at least {cols + 1} rows to fit {cols} features, got {rows}")

    design = np.hstack([X, np.ones((rows, 1))])
    if np.linalg.matrix_rank(design) < cols + 1:
        raise SingularFitError(f"design matrix is rank deficient ({cols} features + intercept)")

    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = np.hstack([(X - center) / scale, np.ones((rows, 1))])
    gram = Z.T @ Z
    penalty = np.full(cols + 1, ridge)
    penalty[-1] = 0.0
    try:
        beta = linalg.solve(gram + np.diag(penalty), Z.T @ y, assume_a='pos')
    except linalg.LinAlgError as exc:
        raise SingularFitError(f"normal equations are singular: {exc}") from exc

    coefficients = beta[:-1] / scale
    intercept = float(beta[-1] - coefficients @ center)
    return LinearModel(coefficients, intercept, list(feature_names or []))


def mlr_predict(model, x):
    """Prediction for one feature vector (float) or a matrix of rows (array)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.coefficients.size:
        raise ShapeError(f"{x.shape[-1]} features for a model with {model.coefficients.size}")
    out = x @ model.coefficients + model.intercept
    return float(out) if x.ndim == 1 else out


def vector_angle(u, v):
    """Angle between u and v in degrees."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.size != v.size:
        raise ShapeError(f"vectors of different arity: {u.size} and {v.size}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise DataError("angle with a zero vector is undefined")
    cosine = float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))
    return float(np.degrees(np.arccos(cosine)))
