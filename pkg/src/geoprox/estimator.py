"""scikit-learn style wrapper: fit the minimizer of an anchor functional by the
proximal point iteration, transform rows by one resolvent step."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .functionals import KINDS, ConvexFunctional
from .geometry import ModelSpace, SpherePoint, normalized_mean
from .ppa import RunConfig, StepSchedule, run_ppa
from .resolvent import InnerSolverConfig, resolve


def check_sphere_array(X, name: str = "X") -> np.ndarray:
    """2D finite float array with nonzero rows, rows rescaled to unit norm."""
    X = check_array(X, dtype=np.float64, ensure_min_features=2)
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise ValueError(f"{name} has zero rows; points must be nonzero vectors")
    return X / norms[:, None]


class ProximalPointEstimator(TransformerMixin, BaseEstimator):
    """Minimizer of a convex anchor functional on a sphere.

    ``fit`` treats the rows of X as anchors of ``kind`` and runs the proximal
    point iteration from ``init`` (default: the first anchor). ``transform``
    maps each row x to R_{lam f} x.

    Parameters
    ----------
    kind : str
        Functional kind with anchors (``cosine_mean``, ``tan_sin_sum``, ``max_cosine``).
    lam : float
        Constant step size.
    max_iter : int
        Outer iteration cap.
    stop_step_tol : float
        Stop when an outer step is shorter than this.
    kappa : float
        Curvature of the model space.
    tol : float
        Inner solver step tolerance.
    init : array-like, optional
        Starting point.

    Attributes
    ----------
    location_ : ndarray
        Final iterate.
    trace_ : PpaTrace
    functional_ : ConvexFunctional
    n_iter_ : int
    n_features_in_ : int
    """

    def __init__(self, kind="cosine_mean", lam=1.0, max_iter=200, stop_step_tol=1e-12,
                 kappa=1.0, tol=1e-10, init=None):
        self.kind = kind
        self.lam = lam
        self.max_iter = max_iter
        self.stop_step_tol = stop_step_tol
        self.kappa = kappa
        self.tol = tol
        self.init = init

    def _space(self, n_features: int) -> ModelSpace:
        return ModelSpace(n_features - 1, float(self.kappa))

    def fit(self, X, y=None, sample_weight=None):
        if self.kind not in KINDS or self.kind in ("custom_combination", "constant"):
            raise ValueError(f"kind must be an anchor functional, got {self.kind!r}")
        X = check_sphere_array(X)
        w = None if sample_weight is None else np.asarray(sample_weight, dtype=float)
        if w is not None and w.shape != (len(X),):
            raise ValueError("sample_weight must have one entry per row")
        f = ConvexFunctional(self.kind, tuple(SpherePoint(r) for r in X),
                             tuple(np.ones(len(X)) if w is None else w))
        space = self._space(X.shape[1])
        if self.init is None:
            x1 = SpherePoint(X[0])
        else:
            x1 = SpherePoint(check_sphere_array(np.atleast_2d(self.init), "init")[0])
        trace = run_ppa(f, x1, StepSchedule("constant", float(self.lam)), space,
                        RunConfig(int(self.max_iter), stop_step_tol=self.stop_step_tol),
                        InnerSolverConfig(tol=self.tol))
        self.functional_ = f
        self.trace_ = trace
        self.location_ = trace.final.coords.copy()
        self.n_iter_ = len(trace)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "location_")
        X = check_sphere_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        space = self._space(X.shape[1])
        cfg = InnerSolverConfig(tol=self.tol)
        return np.vstack([resolve(self.functional_, float(self.lam), SpherePoint(r), space, cfg).point.coords
                          for r in X])

    def score(self, X=None, y=None) -> float:
        """Negative functional value at the fitted location."""
        check_is_fitted(self, "location_")
        return -float(self.functional_(self.location_))

    def mean_start(self, X) -> np.ndarray:
        """Normalized Euclidean mean of the rows, a convenient ``init``."""
        return normalized_mean(list(check_sphere_array(X))).coords
