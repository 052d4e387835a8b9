"""nu-one-class SVM with a Gaussian kernel.

The dual problem

    min_a  1/2 sum_ij a_i a_j k(x_i, x_j)
    s.t.   0 <= a_i <= 1/(nu l),  sum_i a_i = 1

is solved by two-coordinate descent: each step moves mass from the feasible
coordinate with the largest gradient to the one with the smallest, which
keeps the equality constraint satisfied exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numba
import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, DomainError, SolverError

MODEL_VERSION = 1
SIGMA_PAIRS = 1000
SIGMA_SEED = 0

LEGITIMATE = "legitimate"
ATTACK = "attack"


@dataclass(frozen=True)
class OcsvmConfig:
    nu: float = 0.16
    sigma: Union[float, str] = "auto"
    solver_tolerance: float = 1e-9
    max_iterations: int = 10_000_000

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise ConfigError(f"nu must lie in (0, 1], got {self.nu}")
        if isinstance(self.sigma, str):
            if self.sigma != "auto":
                raise ConfigError(f"sigma must be positive or 'auto', got {self.sigma!r}")
        elif not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.solver_tolerance <= 0 or self.max_iterations < 1:
            raise ConfigError("solver_tolerance and max_iterations must be positive")


@dataclass(frozen=True)
class OcsvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    rho: float
    sigma: float
    nu: float
    training_size: int
    iterations: int = 0
    violation: float = 0.0

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]

    def to_dict(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "nu": self.nu,
            "sigma": self.sigma,
            "rho": self.rho,
            "training_size": self.training_size,
            "alphas": self.alphas.tolist(),
            "support_vectors": self.support_vectors.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OcsvmModel":
        if d.get("version") != MODEL_VERSION:
            raise ConfigError(f"unsupported model version {d.get('version')!r}")
        sv = np.asarray(d["support_vectors"], dtype=np.float64)
        alphas = np.asarray(d["alphas"], dtype=np.float64)
        if sv.ndim != 2 or sv.shape[0] != alphas.size:
            raise ConfigError("support_vectors and alphas disagree in shape")
        return cls(
            sv,
            alphas,
            float(d["rho"]),
            float(d["sigma"]),
            float(d["nu"]),
            int(d.get("training_size", alphas.size)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "OcsvmModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _matrix(data) -> np.ndarray:
    rows = [getattr(p, "values", p) for p in data]
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim != 2:
        raise DomainError("expected a list of equal-length vectors")
    return X


def gaussian_kernel(a, b, sigma: float) -> float:
    a = np.asarray(getattr(a, "values", a), dtype=np.float64)
    b = np.asarray(getattr(b, "values", b), dtype=np.float64)
    if a.shape != b.shape:
        raise DomainError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    d2 = float(np.sum((a - b) ** 2))
    return math.exp(-d2 / (2.0 * sigma * sigma))


def kernel_matrix(A: np.ndarray, B: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * sigma * sigma))


def auto_sigma(training) -> float:
    """Median pairwise distance, over at most 1000 pairs drawn with a fixed seed."""
    X = _matrix(training)
    l = X.shape[0]
    if l < 2:
        raise DomainError("need at least two vectors")
    if l * (l - 1) // 2 <= SIGMA_PAIRS:
        i, j = np.triu_indices(l, k=1)
    else:
        rng = np.random.default_rng(SIGMA_SEED)
        i = rng.integers(0, l, SIGMA_PAIRS)
        j = (i + rng.integers(1, l, SIGMA_PAIRS)) % l
    d = np.sqrt(np.sum((X[i] - X[j]) ** 2, axis=1))
    med = float(np.median(d))
    if med > 0:
        return med
    pos = d[d > 0]
    return float(np.median(pos)) if pos.size else 1.0


@numba.njit(cache=True)
def _smo(K, C, tol, max_iter):
    l = K.shape[0]
    alpha = np.full(l, 1.0 / l)
    if 1.0 / l > C:
        alpha[:] = C
    grad = K @ alpha
    it = 0
    viol = 0.0
    while True:
        i = -1
        j = -1
        gmin = np.inf
        gmax = -np.inf
        for k in range(l):
            if alpha[k] < C and grad[k] < gmin:
                gmin = grad[k]
                i = k
            if alpha[k] > 0.0 and grad[k] > gmax:
                gmax = grad[k]
                j = k
        if i < 0 or j < 0:
            viol = 0.0
            break
        viol = gmax - gmin
        if viol <= tol:
            break
        if it >= max_iter:
            break
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad < 1e-12:
            quad = 1e-12
        delta = viol / quad
        room_i = C - alpha[i]
        if delta >= room_i:
            delta = room_i
        if delta >= alpha[j]:
            delta = alpha[j]
        if delta == room_i:
            alpha[i] = C
        else:
            alpha[i] += delta
        if delta == alpha[j]:
            alpha[j] = 0.0
        else:
            alpha[j] -= delta
        for k in range(l):
            grad[k] += delta * (K[k, i] - K[k, j])
        it += 1
    return alpha, grad, it, viol


def _rho(alpha: np.ndarray, grad: np.ndarray, C: float) -> float:
    eps = 1e-9 * C
    free = (alpha > eps) & (alpha < C - eps)
    if free.any():
        return float(grad[free].mean())
    upper = grad[alpha >= C - eps]
    lower = grad[alpha <= eps]
    if upper.size and lower.size:
        return float((upper.max() + lower.min()) / 2.0)
    return float(upper.max() if upper.size else lower.min())


def solve_dual(K: np.ndarray, nu: float, tol: float = 1e-9, max_iterations: int = 10_000_000):
    """Solve the dual for a precomputed kernel; returns (alpha, rho, iterations, violation)."""
    K = np.ascontiguousarray(K, dtype=np.float64)
    l = K.shape[0]
    C = 1.0 / (nu * l)
    alpha, grad, it, viol = _smo(K, C, tol, max_iterations)
    if viol > tol:
        raise SolverError(f"no convergence after {it} iterations", viol)
    return alpha, _rho(alpha, grad, C), int(it), float(viol)


def train(profiles, cfg: OcsvmConfig | None = None) -> OcsvmModel:
    cfg = cfg or OcsvmConfig()
    X = _matrix(profiles)
    l = X.shape[0]
    if l < 2:
        raise DomainError("need at least two training vectors")
    sigma = auto_sigma(X) if cfg.sigma == "auto" else float(cfg.sigma)
    K = kernel_matrix(X, X, sigma)
    alpha, rho, it, viol = solve_dual(K, cfg.nu, cfg.solver_tolerance, cfg.max_iterations)
    keep = alpha > 0
    return OcsvmModel(X[keep].copy(), alpha[keep].copy(), rho, sigma, cfg.nu, l, it, viol)


def dual_objective(model: OcsvmModel) -> float:
    K = kernel_matrix(model.support_vectors, model.support_vectors, model.sigma)
    return 0.5 * float(model.alphas @ K @ model.alphas)


# scores this many ulps of rho away from zero are rounding noise and snap to 0
BOUNDARY_ULPS = 16


def decision_function(model: OcsvmModel, X) -> np.ndarray:
    """Scores ``sum_i a_i k(x_i, x) - rho`` for every row of ``X``.

    A point on the boundary would score exactly zero in exact arithmetic, but
    rho and the kernel sum are accumulated in different orders; scores within
    a few ulps of zero are therefore reported as 0.0.
    """
    X = _matrix(X)
    if X.shape[1] != model.dim:
        raise DomainError(f"expected {model.dim}-dim vectors, got {X.shape[1]}")
    s = kernel_matrix(X, model.support_vectors, model.sigma) @ model.alphas - model.rho
    tiny = BOUNDARY_ULPS * np.finfo(np.float64).eps * max(1.0, abs(model.rho))
    s[np.abs(s) <= tiny] = 0.0
    return s


def decide(model: OcsvmModel, x) -> tuple[float, str]:
    """Score one vector; a score of exactly zero counts as legitimate."""
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    if x.shape != (model.dim,):
        raise DomainError(f"expected a {model.dim}-dim vector, got shape {x.shape}")
    score = float(decision_function(model, x[None, :])[0])
    return score, (LEGITIMATE if score >= 0 else ATTACK)


def outlier_fraction(model: OcsvmModel, X, margin: float = 0.0) -> float:
    """Fraction of rows scoring below ``-margin``."""
    return float(np.mean(decision_function(model, X) < -margin))


def support_fraction(model: OcsvmModel) -> float:
    return model.alphas.size / model.training_size


__all__: Sequence[str] = [
    "OcsvmConfig",
    "OcsvmModel",
    "gaussian_kernel",
    "kernel_matrix",
    "auto_sigma",
    "solve_dual",
    "train",
    "dual_objective",
    "decision_function",
    "decide",
    "outlier_fraction",
    "support_fraction",
]
