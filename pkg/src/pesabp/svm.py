"""Binary kernel SVM trained with sequential minimal optimization.

Labels are the quality classes {0, 1}; internally 0 -> -1. Features are
standardized with statistics of the training set, and the model keeps its
support vectors in that standardized space.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

log = logging.getLogger(__name__)

KERNELS = ("linear", "polynomial", "rbf", "sigmoid")


class ConvergenceError(RuntimeError):
    """SMO hit its iteration budget before satisfying the KKT conditions."""


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "polynomial"
    degree: int = 3
    sigma: float = 1.0
    gamma: float = 0.01
    offset: float = -1.0
    rbf_paper_literal: bool = False

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {self.kind!r}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if int(self.degree) != self.degree or self.degree < 1:
            raise ValueError("degree must be a positive integer")


def kernel_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.kind == "rbf":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        sq = np.maximum(sq, 0.0)
        dist = np.sqrt(sq) if spec.rbf_paper_literal else sq
        return np.exp(-dist / (2.0 * spec.sigma ** 2))
    dot = A @ B.T
    if spec.kind == "linear":
        return dot
    if spec.kind == "polynomial":
        return (1.0 + dot) ** int(spec.degree)
    return np.tanh(spec.gamma * dot + spec.offset)


def kernel_eval(spec: KernelSpec, a, b) -> float:
    a, b = np.asarray(a, dtype=float).ravel(), np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(kernel_matrix(spec, a[None, :], b[None, :])[0, 0])


@dataclass
class Standardizer:
    """z-scores divided by sqrt(n_features), so inner products stay O(1).

    Without the extra factor the cubic kernel reaches 1e4-1e5 on 7 features
    and SMO needs millions of steps.
    """

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        return cls(X.mean(axis=0), np.maximum(X.std(axis=0), 1e-12))

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / (self.std * np.sqrt(len(self.mean)))


@dataclass
class SvmModel:
    kernel: KernelSpec
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    standardizer: Standardizer
    C: float
    threshold: float | None = None
    alphas: np.ndarray | None = field(default=None, repr=False)

    def decision_value(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.standardizer.mean.shape[0]:
            raise ValueError(f"expected {self.standardizer.mean.shape[0]} features, got {X.shape[1]}")
        Z = self.standardizer.transform(X)
        if len(self.dual_coef) == 0:
            return np.full(len(Z), self.bias)
        return kernel_matrix(self.kernel, Z, self.support_vectors) @ self.dual_coef + self.bias

    def predict(self, X) -> np.ndarray:
        return (self.decision_value(X) >= 0).astype(int)

    def to_json(self) -> str:
        doc = {
            "kernel": asdict(self.kernel),
            "standardizer": {"mean": self.standardizer.mean.tolist(), "std": self.standardizer.std.tolist()},
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "C": self.C,
            "threshold": self.threshold,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SvmModel":
        doc = json.loads(text)
        sv = np.asarray(doc["support_vectors"], dtype=float).reshape(len(doc["dual_coef"]), -1)
        return cls(KernelSpec(**doc["kernel"]), sv, np.asarray(doc["dual_coef"], dtype=float),
                   float(doc["bias"]),
                   Standardizer(np.asarray(doc["standardizer"]["mean"]), np.asarray(doc["standardizer"]["std"])),
                   float(doc["C"]), doc.get("threshold"))


def decision_value(model: SvmModel, x):
    """Scalar f(x) for one sample, an array for a batch."""
    out = model.decision_value(x)
    return float(out[0]) if np.ndim(x) == 1 else out


def predict(model: SvmModel, x):
    out = model.predict(x)
    return int(out[0]) if np.ndim(x) == 1 else out


class _Smo:
    """SMO on a precomputed kernel matrix.

    Violations are judged against the two bias thresholds
    b_up = min F over I_up and b_low = max F over I_low, where
    F_i = sum_j alpha_j y_j K_ij - y_i, so no running bias estimate is needed.
    The partner of a violator is the opposite-set index with the extreme F,
    i.e. the largest |E_i - E_j| among admissible partners.
    """

    eps = 1e-12

    def __init__(self, K, y, C, tol):
        self.K, self.y, self.C, self.tol = K, y, C, tol
        self.n = len(y)
        self.alpha = np.zeros(self.n)
        self.F = -y.astype(float)

    def refresh(self):
        self.F = self.K @ (self.alpha * self.y) - self.y

    def _sets(self):
        pos, a, C = self.y > 0, self.alpha, self.C
        up = (pos & (a < C)) | (~pos & (a > 0))
        low = (pos & (a > 0)) | (~pos & (a < C))
        return up, low

    def thresholds(self):
        up, low = self._sets()
        F = self.F
        i_up = int(np.argmin(np.where(up, F, np.inf)))
        i_low = int(np.argmax(np.where(low, F, -np.inf)))
        return F[i_up], i_up, F[i_low], i_low

    def sweep(self) -> int:
        """One pass over the indices in order, stepping at each violator."""
        changed, pos = 0, 0
        while pos < self.n:
            up, low = self._sets()
            F = self.F
            i_up = int(np.argmin(np.where(up, F, np.inf)))
            i_low = int(np.argmax(np.where(low, F, -np.inf)))
            short = up & (F < F[i_low] - 2 * self.tol)  # pair with i_low
            over = low & (F > F[i_up] + 2 * self.tol)   # pair with i_up
            hits = np.flatnonzero((short | over)[pos:])
            if hits.size == 0:
                break
            i = pos + int(hits[0])
            j = i_low if short[i] else i_up
            changed += self.take_step(i, j)
            pos = i + 1
        return changed

    def optimal(self) -> bool:
        b_up, _, b_low, _ = self.thresholds()
        return b_low <= b_up + 2 * self.tol

    def bias(self) -> float:
        # the midpoint keeps every free vector within tol of the margin
        b_up, _, b_low, _ = self.thresholds()
        return float(-(b_up + b_low) / 2)

    def take_step(self, i, j) -> bool:
        if i == j:
            return False
        K, y, C, alpha = self.K, self.y, self.C, self.alpha
        ai, aj, yi, yj = alpha[i], alpha[j], y[i], y[j]
        Fi, Fj = self.F[i], self.F[j]
        s = yi * yj
        if s < 0:
            L, H = max(0.0, aj - ai), min(C, C + aj - ai)
        else:
            L, H = max(0.0, ai + aj - C), min(C, ai + aj)
        if H - L < self.eps:
            return False
        kii, kjj, kij = K[i, i], K[j, j], K[i, j]
        eta = kii + kjj - 2.0 * kij
        if eta > self.eps:
            aj_new = min(H, max(L, aj + yj * (Fi - Fj) / eta))
        else:
            # non-positive curvature: take the better end of the segment
            f1 = yi * Fi - ai * kii - s * aj * kij
            f2 = yj * Fj - s * ai * kij - aj * kjj
            objs = []
            for a2 in (L, H):
                a1 = ai + s * (aj - a2)
                objs.append(a1 * f1 + a2 * f2 + 0.5 * a1 * a1 * kii + 0.5 * a2 * a2 * kjj + s * a1 * a2 * kij)
            if objs[0] < objs[1] - self.eps:
                aj_new = L
            elif objs[0] > objs[1] + self.eps:
                aj_new = H
            else:
                return False
        if abs(aj_new - aj) < self.eps * (aj_new + aj + self.eps):
            return False
        ai_new = ai + s * (aj - aj_new)
        snap = 1e-10 * C
        ai_new = 0.0 if ai_new < snap else (C if ai_new > C - snap else ai_new)
        aj_new = 0.0 if aj_new < snap else (C if aj_new > C - snap else aj_new)
        di, dj = ai_new - ai, aj_new - aj
        alpha[i], alpha[j] = ai_new, aj_new
        self.F += yi * di * K[i] + yj * dj * K[j]
        return True



def smo_train(X, y, C: float = 1.0, spec: KernelSpec = KernelSpec(), tol: float = 1e-3,
              max_passes: int = 20, max_sweeps: int = 10_000, threshold: float | None = None) -> SvmModel:
    """Fit a binary SVM. ``y`` holds classes {0, 1} (or {-1, +1}).

    Sweeps examine every KKT violator in index order. Training ends when the
    bias thresholds agree within ``2 tol``; ``max_passes`` bounds the number
    of consecutive stalled sweeps (violators left but no pair able to move),
    after which the best-effort model is returned with a warning.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    ys = np.where(y > 0, 1.0, -1.0)
    if len(ys) < 2 or len(np.unique(ys)) < 2:
        raise ValueError("SMO needs at least two samples from both classes")
    if not C > 0:
        raise ValueError("C must be positive")
    std = Standardizer.fit(X)
    Z = std.transform(X)
    smo = _Smo(kernel_matrix(spec, Z, Z), ys, float(C), tol)
    stalled = 0
    for _ in range(max_sweeps):
        if smo.sweep():
            stalled = 0
            continue
        smo.refresh()  # drop accumulated rounding before trusting the verdict
        if smo.optimal():
            break
        stalled += 1
        if stalled >= max_passes:
            log.warning("SMO stalled with KKT violators left after %d sweeps", stalled)
            break
    else:
        raise ConvergenceError(f"SMO did not converge within {max_sweeps} sweeps")
    sv = smo.alpha > 0
    return SvmModel(spec, Z[sv], smo.alpha[sv] * ys[sv], smo.bias(), std, float(C), threshold,
                    alphas=smo.alpha.copy())
