"""Catalog and calculus of admissible homogeneous speed functions f(lambda).

Every speed is symmetric, positively homogeneous of some degree alpha and
strictly monotone in each principal curvature on its admissibility cone.
Besides evaluation and gradients, this module provides the second-derivative
quadratic form of the associated matrix function, the constant mu bounding it
against H^(alpha-2), and the sandwich defects comparing the speed to the pure
mean-curvature power.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .curvature_algebra import PreconditionError


class ConeError(PreconditionError):
    """Evaluation requested outside the admissibility cone."""


def _elementary_symmetric(lam: np.ndarray) -> np.ndarray:
    """e[0..n] with e[j] the j-th elementary symmetric polynomial of lam.

    Accepts shape (n,) or (n, M); batched input yields shape (n + 1, M).
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[0]
    e = np.zeros((n + 1,) + lam.shape[1:])
    e[0] = 1.0
    for x in lam:
        for j in range(n, 0, -1):
            e[j] += x * e[j - 1]
    return e


def _esp_excluding(lam: np.ndarray, i: int) -> np.ndarray:
    mask = np.ones(lam.size, dtype=bool)
    mask[i] = False
    return _elementary_symmetric(lam[mask])


@dataclass(frozen=True)
class SpeedFunction:
    """Symmetric homogeneous speed with analytic gradient and cone check."""

    name: str
    n: int
    degree: float
    normalized: bool
    _eval: Callable[[np.ndarray], float]
    _grad: Callable[[np.ndarray], np.ndarray]
    _cone: Callable[[np.ndarray], bool]
    _batch: Callable[[np.ndarray], np.ndarray] | None = None

    def in_cone(self, lam) -> bool:
        return bool(self._cone(np.asarray(lam, dtype=float)))

    def batch(self, lam) -> np.ndarray:
        """Evaluate at many points at once: lam of shape (n, M) -> values (M,)."""
        lam = np.asarray(lam, dtype=float)
        if lam.ndim != 2 or lam.shape[0] != self.n:
            raise PreconditionError(f"expected shape ({self.n}, M), got {lam.shape}")
        if self._batch is not None:
            return self._batch(lam)
        return np.array([self(lam[:, j]) for j in range(lam.shape[1])])

    def __call__(self, lam) -> float:
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.n,):
            raise PreconditionError(f"expected {self.n} curvatures, got shape {lam.shape}")
        if not self._cone(lam):
            raise ConeError(f"{self.name}: point {lam} outside admissibility cone")
        return float(self._eval(lam))

    def grad(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if not self._cone(lam):
            raise ConeError(f"{self.name}: point {lam} outside admissibility cone")
        return np.asarray(self._grad(lam), dtype=float)


@dataclass(frozen=True)
class MuBound:
    """Sampled bound: |F''(A)[B,B]| <= mu * H^(alpha-2) |B|^2 on the pinched cone."""

    mu: float
    n: int
    alpha: float
    sample_count: int


def _positive_cone(lam):
    return np.all(lam > 0)


def _mean_positive(lam):
    return lam.sum() > 0


def _check_batch(ok: np.ndarray, name: str):
    bad = np.flatnonzero(~ok)
    if bad.size:
        raise ConeError(f"{name}: {bad.size} points outside admissibility cone "
                        f"(first at index {int(bad[0])})")


def _batch_mean_positive(name):
    def check(lam):
        _check_batch(lam.sum(axis=0) > 0, name)
    return check


def _batch_positive(name):
    def check(lam):
        _check_batch(np.all(lam > 0, axis=0), name)
    return check


def builtin(name: str, n: int, power: float | None = None, k: int | None = None) -> SpeedFunction:
    """Construct a registered speed: H, norm, H^a, K^b, Sk_root or Sk_ratio."""
    if n < 1:
        raise PreconditionError("need n >= 1")
    if name == "H":
        chk = _batch_mean_positive("H")

        def _bH(l):
            chk(l)
            return l.sum(axis=0)

        return SpeedFunction("H", n, 1.0, False,
                             lambda l: l.sum(), lambda l: np.ones(n), _mean_positive,
                             _batch=_bH)
    if name == "norm":
        chk = _batch_mean_positive("norm")

        def _bnorm(l):
            chk(l)
            return np.linalg.norm(l, axis=0)

        return SpeedFunction("norm", n, 1.0, False,
                             lambda l: np.linalg.norm(l),
                             lambda l: l / np.linalg.norm(l), _mean_positive,
                             _batch=_bnorm)
    if name == "H^a":
        if power is None or power <= 0:
            raise PreconditionError("H^a requires a positive power")
        a = float(power)
        chk = _batch_mean_positive(f"H^{a:g}")

        def _bHa(l):
            chk(l)
            return l.sum(axis=0) ** a

        return SpeedFunction(f"H^{a:g}", n, a, False,
                             lambda l: l.sum() ** a,
                             lambda l: a * l.sum() ** (a - 1) * np.ones(n),
                             _mean_positive, _batch=_bHa)
    if name == "K^b":
        if power is None or power <= 0:
            raise PreconditionError("K^b requires a positive power")
        b = float(power)
        chk = _batch_positive(f"K^{b:g}")

        def _bKb(l):
            chk(l)
            return np.prod(l, axis=0) ** b

        return SpeedFunction(f"K^{b:g}", n, n * b, False,
                             lambda l: float(np.prod(l)) ** b,
                             lambda l: b * float(np.prod(l)) ** b / l,
                             _positive_cone, _batch=_bKb)
    if name == "Sk_root":
        if k is None or not 1 <= k <= n:
            raise PreconditionError("Sk_root requires 1 <= k <= n")
        kk = int(k)

        def _eval(l):
            return _elementary_symmetric(l)[kk] ** (1.0 / kk)

        def _grad(l):
            Sk = _elementary_symmetric(l)[kk]
            d = np.array([_esp_excluding(l, i)[kk - 1] for i in range(n)])
            return (1.0 / kk) * Sk ** (1.0 / kk - 1.0) * d

        chk = _batch_positive(f"S{kk}_root")

        def _beval(l):
            chk(l)
            return _elementary_symmetric(l)[kk] ** (1.0 / kk)

        return SpeedFunction(f"S{kk}_root", n, 1.0, False, _eval, _grad,
                             _positive_cone, _batch=_beval)
    if name == "Sk_ratio":
        if k is None or not 1 <= k <= n:
            raise PreconditionError("Sk_ratio requires 1 <= k <= n")
        kk = int(k)

        def _eval(l):
            e = _elementary_symmetric(l)
            return e[kk] / e[kk - 1]

        def _grad(l):
            e = _elementary_symmetric(l)
            dk = np.array([_esp_excluding(l, i)[kk - 1] for i in range(n)])
            dkm = (np.array([_esp_excluding(l, i)[kk - 2] for i in range(n)])
                   if kk >= 2 else np.zeros(n))
            return (dk * e[kk - 1] - e[kk] * dkm) / e[kk - 1] ** 2

        chk = _batch_positive(f"S{kk}/S{kk-1}")

        def _bratio(l):
            chk(l)
            e = _elementary_symmetric(l)
            return e[kk] / e[kk - 1]

        return SpeedFunction(f"S{kk}/S{kk-1}", n, 1.0, False, _eval, _grad,
                             _positive_cone, _batch=_bratio)
    raise PreconditionError(f"unknown speed {name!r}")


def normalize(f: SpeedFunction) -> SpeedFunction:
    """Rescale so that the value at the unit point (1, ..., 1) is one."""
    unit = np.ones(f.n)
    c = f(unit)
    if c <= 0:
        raise PreconditionError("speed must be positive at the unit point")
    if np.isclose(c, 1.0):
        return SpeedFunction(f.name, f.n, f.degree, True, f._eval, f._grad, f._cone,
                             _batch=f._batch)
    ev, gr, bt = f._eval, f._grad, f._batch
    return SpeedFunction(f.name, f.n, f.degree, True,
                         lambda l: ev(l) / c, lambda l: gr(l) / c, f._cone,
                         _batch=(None if bt is None else (lambda l: bt(l) / c)))


def speed_from_config(obj, n: int) -> SpeedFunction:
    """Build a speed from config: either a name string or a table.

    Recognized keys: ``name`` (required), ``power``, ``k``,
    ``normalized = true|false``.
    """
    if isinstance(obj, str):
        obj = {"name": obj}
    if not isinstance(obj, dict) or "name" not in obj:
        raise PreconditionError("speed spec must be a name or a table with a 'name' key")
    f = builtin(obj["name"], n, power=obj.get("power"), k=obj.get("k"))
    if obj.get("normalized", False):
        f = normalize(f)
    return f


# ---------------------------------------------------------------------------
# second derivatives of the matrix function F(W) = f(lambda(W))

def _mean_power_scale(f: SpeedFunction) -> float:
    """Scale c with f/c agreeing with H^degree on umbilic points."""
    return f(np.ones(f.n)) / float(f.n) ** f.degree


def hessian_fd(f: SpeedFunction, lam: np.ndarray, rel_step: float = 1e-5) -> np.ndarray:
    """Central-difference Hessian of f in the eigenvalues."""
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    hstep = rel_step * np.maximum(np.abs(lam), 1.0)
    Hess = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n); ei[i] = hstep[i]
            ej = np.zeros(n); ej[j] = hstep[j]
            if i == j:
                val = (f(lam + ei) - 2.0 * f(lam) + f(lam - ei)) / hstep[i] ** 2
            else:
                val = (f(lam + ei + ej) - f(lam + ei - ej)
                       - f(lam - ei + ej) + f(lam - ei - ej)) / (4 * hstep[i] * hstep[j])
            Hess[i, j] = Hess[j, i] = val
    if not np.all(np.isfinite(Hess)):
        raise PreconditionError("non-finite Hessian entries")
    return Hess


def matrix_second_form(f: SpeedFunction, lam: np.ndarray, B: np.ndarray,
                       rel_step: float = 1e-5) -> float:
    """Quadratic form F''(diag(lam))[B, B] for a symmetric matrix B.

    Uses the standard eigenvalue-function formula: the Hessian of f on the
    diagonal of B plus divided differences (f_i - f_j)/(lam_i - lam_j) on the
    off-diagonal entries, with the symmetric limit at coalescing eigenvalues.
    """
    lam = np.asarray(lam, dtype=float)
    B = np.asarray(B, dtype=float)
    n = lam.size
    Hess = hessian_fd(f, lam, rel_step)
    g = f.grad(lam)
    total = float(np.diag(B) @ Hess @ np.diag(B))
    scale = np.abs(lam).max()
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if abs(lam[i] - lam[j]) < 1e-8 * scale:
                dd = Hess[i, i] - Hess[i, j]
            else:
                dd = (g[i] - g[j]) / (lam[i] - lam[j])
            total += dd * B[i, j] ** 2
    return total


def second_form_operator_norm(f: SpeedFunction, lam: np.ndarray,
                              rel_step: float = 1e-5) -> float:
    """max over symmetric B of |F''(diag(lam))[B, B]| / |B|^2.

    The quadratic form decouples into the eigenvalue Hessian acting on the
    diagonal of B and independent divided-difference coefficients on the
    off-diagonal entries, so the supremum over B is exact.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    Hess = hessian_fd(f, lam, rel_step)
    g = f.grad(lam)
    worst = float(np.abs(np.linalg.eigvalsh(Hess)).max())
    scale = np.abs(lam).max()
    for i in range(n):
        for j in range(i + 1, n):
            if abs(lam[i] - lam[j]) < 1e-8 * scale:
                dd = Hess[i, i] - Hess[i, j]
            else:
                dd = (g[i] - g[j]) / (lam[i] - lam[j])
            worst = max(worst, abs(dd))
    return worst


def estimate_mu(f: SpeedFunction, n: int, samples: int = 400, rng=None,
                ratio_max: float = 10.0, rel_step: float = 1e-5) -> MuBound:
    """Sampled constant mu with |F''(A)[B,B]| <= mu H^(alpha-2) |B|^2.

    A ranges over pinched diagonal matrices (eigenvalue ratio <= ratio_max in
    the positive cone); the supremum over B is exact per sample.  The speed is
    scaled to agree with H^degree on umbilics before differentiating.  The
    returned constant is the sampled supremum inflated by the degree: the raw
    supremum already validates the first-order sandwich, but the zeroth-order
    one needs the extra factor (Taylor remainder carries mu/2, the stated
    bound mu/(2 alpha)); the inflated value is still an admissible mu.
    """
    alpha = f.degree
    if alpha <= 1.0:
        raise PreconditionError("mu estimation requires homogeneity degree > 1")
    if n != f.n:
        raise PreconditionError("dimension mismatch")
    rng = np.random.default_rng(rng)
    c = _mean_power_scale(f)
    raw = 0.0
    for _ in range(samples):
        lam = np.exp(rng.uniform(0.0, np.log(ratio_max), size=n))
        H = lam.sum()
        ratio = second_form_operator_norm(f, lam, rel_step) / c * H ** (2.0 - alpha)
        raw = max(raw, ratio)
    return MuBound(mu=alpha * raw, n=n, alpha=alpha, sample_count=samples)


def sandwich_defects(f: SpeedFunction, mu: float, lam: np.ndarray):
    """Signed defects of the first- and zeroth-order mean-power sandwich bounds.

    Returns (lower_dF, upper_dF, lower_F, upper_F), each expected >= 0:
    the derivative of F lies within mu H^(alpha-2) |h ring| of alpha H^(alpha-1)
    in the operator order, and F within (mu / 2 alpha) H^(alpha-2) |h ring|^2
    of H^alpha.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ConeError("sandwich bounds are stated on the positive cone")
    alpha = f.degree
    c = _mean_power_scale(f)
    H = lam.sum()
    ring = np.sqrt(max(float(np.sum(lam * lam)) - H * H / lam.size, 0.0))
    g = f.grad(lam) / c
    F = f(lam) / c
    lo1 = alpha * H ** (alpha - 1.0) - mu * H ** (alpha - 2.0) * ring
    hi1 = alpha * H ** (alpha - 1.0) + mu * H ** (alpha - 2.0) * ring
    lo0 = H**alpha - (mu / (2.0 * alpha)) * H ** (alpha - 2.0) * ring**2
    hi0 = H**alpha + (mu / (2.0 * alpha)) * H ** (alpha - 2.0) * ring**2
    return (float(g.min() - lo1), float(hi1 - g.max()),
            float(F - lo0), float(hi0 - F))


def sigma_threshold(alpha: float, mu: float, n: int) -> float:
    """Admissible exponent bound (alpha - 1) / (4 n (alpha + mu))."""
    if alpha <= 1.0:
        raise PreconditionError("requires homogeneity degree > 1")
    return (alpha - 1.0) / (4.0 * n * (alpha + mu))
