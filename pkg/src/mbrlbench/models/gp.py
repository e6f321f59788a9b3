"""Exact Gaussian-process regression with an ARD Matern 5/2 kernel.

One independent zero-mean GP per output dimension. Hyperparameters are
fitted by maximizing the log marginal likelihood in log space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist, pdist

from .base import DynamicsModel, Standardizer, as_arrays

log = logging.getLogger(__name__)

SQRT5 = np.sqrt(5.0)

# bounds in natural units; optimization runs on their logs
LENGTHSCALE_BOUNDS = (1e-2, 1e2)
SIGNAL_BOUNDS = (1e-6, 1e2)
NOISE_BOUNDS = (1e-6, 1e1)


class GPNumericalError(np.linalg.LinAlgError):
    """Kernel matrix stayed non positive definite after the full jitter schedule."""


@dataclass(frozen=True)
class GPHyper:
    lengthscales: np.ndarray
    signal_var: float
    noise_var: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if np.any(ls <= 0) or self.signal_var <= 0 or self.noise_var <= 0:
            raise ValueError(f"GP hyperparameters must be strictly positive: {self}")

    def to_log(self) -> np.ndarray:
        return np.concatenate([np.log(self.lengthscales), [np.log(self.signal_var), np.log(self.noise_var)]])

    @classmethod
    def from_log(cls, v) -> "GPHyper":
        v = np.asarray(v, dtype=float)
        return cls(np.exp(v[:-2]), float(np.exp(v[-2])), float(np.exp(v[-1])))


def _matern_of_r(r, signal_var):
    return signal_var * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * np.exp(-SQRT5 * r)


def matern52(x, x2, hyper: GPHyper) -> float:
    """Kernel value for a single pair of points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape:
        raise ValueError("points must have equal dimension")
    r = np.sqrt(np.sum(((x - x2) / hyper.lengthscales) ** 2))
    return float(_matern_of_r(r, hyper.signal_var))


def matern52_matrix(X1, X2, lengthscales, signal_var) -> np.ndarray:
    r = cdist(np.asarray(X1) / lengthscales, np.asarray(X2) / lengthscales)
    return _matern_of_r(r, signal_var)


JITTERS = (0.0,) + tuple(10.0 ** -k for k in range(8, 1, -1))


def stable_cholesky(K):
    """Lower Cholesky factor, adding 1e-8 ... 1e-2 to the diagonal if needed."""
    for jitter in JITTERS:
        try:
            A = K if jitter == 0.0 else K + jitter * np.eye(len(K))
            return cholesky(A, lower=True, check_finite=True)
        except np.linalg.LinAlgError:
            continue
        except ValueError as exc:  # non-finite entries
            raise GPNumericalError(str(exc)) from exc
    raise GPNumericalError(f"Cholesky failed with jitter up to {JITTERS[-1]}")


class GPPosterior:
    """Cached factorization for repeated predictions from one training set."""

    def __init__(self, X, y, hyper: GPHyper):
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self.y = np.asarray(y, dtype=float).ravel()
        self.hyper = hyper
        if len(self.X):
            K = matern52_matrix(self.X, self.X, hyper.lengthscales, hyper.signal_var)
            K[np.diag_indices_from(K)] += hyper.noise_var
            self.L = stable_cholesky(K)
            self.alpha = cho_solve((self.L, True), self.y)
        else:
            self.L = self.alpha = None

    def mean(self, Xs) -> np.ndarray:
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        if self.alpha is None:
            return np.zeros(len(Xs))
        return matern52_matrix(Xs, self.X, self.hyper.lengthscales, self.hyper.signal_var) @ self.alpha

    def predict(self, Xs):
        """Latent mean and variance (noise excluded) at test rows."""
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        prior = np.full(len(Xs), self.hyper.signal_var)
        if self.alpha is None:
            return np.zeros(len(Xs)), prior
        Ks = matern52_matrix(Xs, self.X, self.hyper.lengthscales, self.hyper.signal_var)
        v = solve_triangular(self.L, Ks.T, lower=True)
        var = np.maximum(prior - np.sum(v * v, axis=0), 0.0)
        return Ks @ self.alpha, var


def gp_posterior(X, Y, Xs, hyper):
    """Posterior mean and latent variance at ``Xs``.

    With 1-D ``Y`` and a single :class:`GPHyper` returns two (B,) arrays. With
    2-D ``Y`` pass one hyper per column (or one shared) and get (B, m) arrays.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim <= 1:
        return GPPosterior(X, Y, hyper).predict(Xs)
    hypers = hyper if isinstance(hyper, (list, tuple)) else [hyper] * Y.shape[1]
    outs = [GPPosterior(X, Y[:, j], h).predict(Xs) for j, h in enumerate(hypers)]
    return np.stack([o[0] for o in outs], axis=1), np.stack([o[1] for o in outs], axis=1)


def log_marginal_likelihood(X, y, hyper: GPHyper, with_grad: bool = False):
    """``log p(y | X, hyper)``; optionally its gradient w.r.t. :meth:`GPHyper.to_log`."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, dim = X.shape
    ls = hyper.lengthscales
    diff2 = (X[:, None, :] - X[None, :, :]) ** 2 / ls ** 2  # (n, n, dim)
    r = np.sqrt(diff2.sum(axis=-1))
    e = np.exp(-SQRT5 * r)
    K = hyper.signal_var * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * e
    Kf = K.copy()
    Kf[np.diag_indices(n)] += hyper.noise_var
    L = stable_cholesky(Kf)
    alpha = cho_solve((L, True), y)
    lml = -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * np.log(2 * np.pi)
    if not with_grad:
        return float(lml)
    W = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(n))
    g = np.empty(dim + 2)
    # dk/dlog(l_d) = s2 * 5/3 * (1 + sqrt5 r) e^{-sqrt5 r} * (dx_d / l_d)^2
    common = hyper.signal_var * 5.0 / 3.0 * (1.0 + SQRT5 * r) * e
    for d in range(dim):
        g[d] = 0.5 * np.sum(W * common * diff2[:, :, d])
    g[dim] = 0.5 * np.sum(W * K)
    g[dim + 1] = 0.5 * hyper.noise_var * np.trace(W)
    return float(lml), g


def median_heuristic(X, y) -> GPHyper:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) > 1:
        ls = np.array([np.median(pdist(X[:, [d]])) for d in range(X.shape[1])])
    else:
        ls = np.ones(X.shape[1])
    ls = np.clip(np.where(ls > 0, ls, 1.0), *LENGTHSCALE_BOUNDS)
    vy = float(np.var(y))
    var = float(np.clip(vy, SIGNAL_BOUNDS[0] * 10, SIGNAL_BOUNDS[1])) if vy > 0 else 1.0
    return GPHyper(ls, var, float(np.clip(1e-2 * var, *NOISE_BOUNDS)))


def _log_bounds(dim):
    b = [tuple(np.log(LENGTHSCALE_BOUNDS))] * dim
    return b + [tuple(np.log(SIGNAL_BOUNDS)), tuple(np.log(NOISE_BOUNDS))]


def gp_fit_hyper(X, y, rng=None, restarts: int = 3, init: GPHyper | None = None, max_iter: int = 100) -> GPHyper:
    """Maximize the log marginal likelihood from ``init`` plus ``restarts`` random starts.

    The returned hyperparameters never have lower likelihood than the
    starting point. If every start fails numerically, the median-distance
    heuristic is returned.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) < 2:
        raise ValueError("need at least two points to fit GP hyperparameters")
    rng = np.random.default_rng(0) if rng is None else rng
    heuristic = median_heuristic(X, y)
    start = init if init is not None else heuristic
    bounds = _log_bounds(X.shape[1])
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    def objective(v):
        try:
            f, g = log_marginal_likelihood(X, y, GPHyper.from_log(v), with_grad=True)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError):
            return 1e25, np.zeros_like(v)
        if not np.isfinite(f):
            return 1e25, np.zeros_like(v)
        return -f, -g

    starts = [np.clip(start.to_log(), lo, hi)]
    for _ in range(restarts):
        starts.append(np.clip(heuristic.to_log() + rng.normal(0.0, 1.0, len(lo)), lo, hi))

    best_v, best_f = starts[0], objective(starts[0])[0]
    for v0 in starts:
        res = minimize(objective, v0, jac=True, method="L-BFGS-B", bounds=bounds, options={"maxiter": max_iter})
        if np.isfinite(res.fun) and res.fun < best_f:
            best_v, best_f = res.x, res.fun
    if best_f >= 1e25:
        log.warning("GP hyperparameter fit failed from every start; using median heuristic")
        return heuristic
    return GPHyper.from_log(best_v)


class GPModel(DynamicsModel):
    """Independent GP per state dimension on z-scored inputs and delta targets.

    Keeps the ``max_points`` most recent transitions; hyperparameters are
    refit on every :meth:`fit` on a seeded subsample of at most
    ``hyper_points`` of them, warm-started from the previous fit.
    """

    model_id = "gp"
    has_epistemic = True
    has_aleatoric = True

    def __init__(self, obs_dim, act_dim, max_points: int = 1000, hyper_points: int = 300,
                 restarts: int = 3, max_iter: int = 100, seed: int = 0):
        super().__init__(obs_dim, act_dim, seed)
        self.max_points = int(max_points)
        self.hyper_points = int(hyper_points)
        self.restarts = int(restarts)
        self.max_iter = int(max_iter)
        self.hypers: list[GPHyper] | None = None
        self.posteriors: list[GPPosterior] = []
        self.n_fits = 0

    def fit(self, data):
        S, A, S2 = as_arrays(data)
        S, A = self._inputs(S, A)
        X = np.concatenate([S, A], axis=1)[-self.max_points:]
        Y = (S2 - S)[-self.max_points:]
        # build everything locally so a numerical failure leaves the old model intact
        xs, ys = Standardizer.fit(X), Standardizer.fit(Y)
        Z, T = xs(X), ys(Y)

        rng = np.random.default_rng(np.random.SeedSequence([self.seed, self.n_fits]))
        if len(Z) > self.hyper_points:
            idx = np.sort(rng.choice(len(Z), self.hyper_points, replace=False))
        else:
            idx = np.arange(len(Z))
        hypers = []
        for j in range(self.obs_dim):
            init = self.hypers[j] if self.hypers is not None else None
            if len(idx) >= 2:
                hypers.append(gp_fit_hyper(Z[idx], T[idx, j], rng, self.restarts, init, self.max_iter))
            else:
                hypers.append(init or GPHyper(np.ones(Z.shape[1]), 1.0, 1e-2))
        posteriors = [GPPosterior(Z, T[:, j], h) for j, h in enumerate(hypers)]
        self.x_scaler, self.y_scaler = xs, ys
        self.hypers, self.posteriors = hypers, posteriors
        self.n_fits += 1
        self._fitted = True

    def _scaled(self, S, A):
        self._require_fitted()
        S, A = self._inputs(S, A)
        return S, self.x_scaler(np.concatenate([S, A], axis=1))

    def prior_variance(self) -> np.ndarray:
        """Latent prior variance per state dimension in raw units."""
        self._require_fitted()
        return np.array([h.signal_var for h in self.hypers]) * self.y_scaler.std ** 2

    def predict_batch(self, S, A, rng=None):
        S, Z = self._scaled(S, A)
        mean = np.empty_like(S)
        epi = np.empty_like(S)
        for j, post in enumerate(self.posteriors):
            mean[:, j], epi[:, j] = post.predict(Z)
        sy, my = self.y_scaler.std, self.y_scaler.mean
        noise = np.array([h.noise_var for h in self.hypers]) * sy ** 2
        return S + mean * sy + my, epi * sy ** 2, np.broadcast_to(noise, S.shape).copy()

    def predict_mean(self, S, A, rng=None):
        S, Z = self._scaled(S, A)
        mean = np.stack([post.mean(Z) for post in self.posteriors], axis=1)
        return S + self.y_scaler.inverse(mean)
