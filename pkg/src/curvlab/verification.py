"""Randomized verification campaigns for the pointwise curvature inequalities.

Each campaign draws millions of samples (batched, chunked) on or near the
constraint surface where its inequality is tight, evaluates the signed defect
oriented so that "defect >= 0" is the claim, and reports the minimum together
with the argmin sample for reproduction.  The batched kernels here are an
independent code path from :mod:`curvlab.curvature_algebra`; the test suite
cross-checks the two against naive index-loop oracles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .curvature_algebra import (
    PreconditionError,
    SpherePinchingConstants,
    euclidean_pinching_threshold,
)

_CHUNK = 20_000


@dataclass
class CampaignReport:
    inequality: str
    samples: int
    seed: int
    tolerance: float
    min_defect: float
    violations: int
    argmin: dict
    params: dict

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(asdict(self), indent=indent, default=float)

    @property
    def passed(self) -> bool:
        return self.violations == 0


# ---------------------------------------------------------------------------
# batched kernels, h has shape (B, n, n, k)

def sample_symmetric(rng: np.random.Generator, B: int, n: int, k: int) -> np.ndarray:
    h = rng.standard_normal((B, n, n, k))
    return 0.5 * (h + h.transpose(0, 2, 1, 3))


def batch_trace(h: np.ndarray) -> np.ndarray:
    return np.einsum("biia->ba", h)


def batch_norms(h: np.ndarray):
    normh_sq = np.einsum("bija,bija->b", h, h)
    H = batch_trace(h)
    normH_sq = np.einsum("ba,ba->b", H, H)
    return normh_sq, H, normH_sq


def batch_traceless(h: np.ndarray) -> np.ndarray:
    n = h.shape[1]
    H = batch_trace(h)
    ring = h.copy()
    idx = np.arange(n)
    ring[:, idx, idx, :] -= H[:, None, :] / n
    return ring


def project_to_pinching_boundary(h: np.ndarray, C0: float) -> np.ndarray:
    """Rescale the traceless part so that |h|^2 = C0 |H|^2 exactly."""
    n = h.shape[1]
    ring = batch_traceless(h)
    H = batch_trace(h)
    normH_sq = np.einsum("ba,ba->b", H, H)
    ring_sq = np.einsum("bija,bija->b", ring, ring)
    good = (normH_sq > 1e-12) & (ring_sq > 1e-12)
    s = np.sqrt((C0 - 1.0 / n) * normH_sq[good] / ring_sq[good])
    out = np.zeros_like(h)
    idx = np.arange(n)
    out[:, idx, idx, :] = H[:, None, :] / n
    out[good] += s[:, None, None, None] * ring[good]
    return out[good]


def batch_reaction_terms(h: np.ndarray):
    """Vectorized (R1, R2) via Frobenius/trace contractions of normal-slice products."""
    S = np.einsum("bija,bijc->bac", h, h)
    M = np.einsum("bija,bjlc->bilac", h, h)  # A_a A_c products, (B, n, n, k, k)
    sq = np.einsum("bijac,bijac->b", M, M)
    cross = np.einsum("bijac,bjiac->b", M, M)
    R1 = np.einsum("bac,bac->b", S, S) + 2.0 * (sq - cross)
    H = batch_trace(h)
    T = np.einsum("ba,bija->bij", H, h)
    R2 = np.einsum("bij,bij->b", T, T)
    return R1, R2


def _chunks(total: int, chunk: int = _CHUNK):
    done = 0
    while done < total:
        yield min(chunk, total - done)
        done += chunk


# ---------------------------------------------------------------------------
# campaigns: yield (relative defect array, serializable sample getter)

def _reduce(defects: np.ndarray, samples, best):
    i = int(np.argmin(defects))
    if defects[i] < best[0]:
        return (float(defects[i]), samples(i))
    return best


def campaign_pinching_cone(rng, samples, dims=((2, 2), (2, 3), (3, 2), (3, 3),
                                               (4, 2), (4, 3), (5, 2), (5, 3)),
                           C0_margin=1e-6):
    """R1 - C0 R2 <= 0 on the boundary |h|^2 = C0 |H|^2 at C0 = threshold - margin."""
    best = (np.inf, None)
    count = 0
    for n, k in dims:
        C0 = euclidean_pinching_threshold(n) - C0_margin
        for b in _chunks(samples):
            h = project_to_pinching_boundary(sample_symmetric(rng, b, n, k), C0)
            R1, R2 = batch_reaction_terms(h)
            normh_sq, _, _ = batch_norms(h)
            defects = (C0 * R2 - R1) / normh_sq**2
            count += h.shape[0]
            best = _reduce(defects, lambda i: {"n": n, "k": k, "C0": C0,
                                               "h": h[i].tolist()}, best)
    return count, best


def campaign_traceless_bound(rng, samples, n=3, k=2):
    """Adapted-frame upper bound on R1 - R2/n, sampled over generic h."""
    best = (np.inf, None)
    count = 0
    for b in _chunks(samples):
        h = sample_symmetric(rng, b, n, k)
        normh_sq, H, normH_sq = batch_norms(h)
        keep = normH_sq > 1e-10
        h, normh_sq, H, normH_sq = h[keep], normh_sq[keep], H[keep], normH_sq[keep]
        ring = batch_traceless(h)
        nu1 = H / np.sqrt(normH_sq)[:, None]
        ring1 = np.einsum("bija,ba->bij", ring, nu1)
        r1sq = np.einsum("bij,bij->b", ring1, ring1)
        rmsq = np.maximum(np.einsum("bija,bija->b", ring, ring) - r1sq, 0.0)
        rhs = r1sq**2 + r1sq * normH_sq / n + 4.0 * r1sq * rmsq + 1.5 * rmsq**2
        R1, R2 = batch_reaction_terms(h)
        defects = (rhs - (R1 - R2 / n)) / normh_sq**2
        count += h.shape[0]
        best = _reduce(defects, lambda i: {"n": n, "k": k, "h": h[i].tolist()}, best)
    return count, best


def campaign_minimal_trace_free(rng, samples, n=3, k=2):
    """R1 <= (3/2)|h|^4 for h with vanishing trace in every normal direction."""
    best = (np.inf, None)
    count = 0
    for b in _chunks(samples):
        h = batch_traceless(sample_symmetric(rng, b, n, k))
        R1, _ = batch_reaction_terms(h)
        normh_sq, _, _ = batch_norms(h)
        defects = (1.5 * normh_sq**2 - R1) / normh_sq**2
        count += h.shape[0]
        best = _reduce(defects, lambda i: {"n": n, "k": k, "h": h[i].tolist()}, best)
    return count, best


def campaign_chen_sectional(rng, samples, n=4, k=2, C0=None, random_planes=2):
    """Sectional curvature >= (1/2)(1/(n-1) - C0)|H|^2 on pinched boundary samples."""
    if C0 is None:
        C0 = euclidean_pinching_threshold(n) - 1e-6
    best = (np.inf, None)
    count = 0
    for b in _chunks(samples):
        h = project_to_pinching_boundary(sample_symmetric(rng, b, n, k), C0)
        B = h.shape[0]
        _, _, normH_sq = batch_norms(h)
        bound = 0.5 * (1.0 / (n - 1) - C0) * normH_sq
        idx = np.arange(n)
        D = h[:, idx, idx, :]  # (B, n, k) diagonal rows
        Kmat = np.einsum("bia,bja->bij", D, D) - np.einsum("bija,bija->bij", h, h)
        iu = np.triu_indices(n, 1)
        Kmin = Kmat[:, iu[0], iu[1]].min(axis=1)
        for _ in range(random_planes):
            x = rng.standard_normal((B, n))
            x /= np.linalg.norm(x, axis=1, keepdims=True)
            w = rng.standard_normal((B, n))
            w -= np.einsum("bi,bi->b", w, x)[:, None] * x
            y = w / np.linalg.norm(w, axis=1, keepdims=True)
            hxx = np.einsum("bija,bi,bj->ba", h, x, x)
            hyy = np.einsum("bija,bi,bj->ba", h, y, y)
            hxy = np.einsum("bija,bi,bj->ba", h, x, y)
            Kp = np.einsum("ba,ba->b", hxx, hyy) - np.einsum("ba,ba->b", hxy, hxy)
            Kmin = np.minimum(Kmin, Kp)
        defects = (Kmin - bound) / normH_sq
        count += B
        best = _reduce(defects, lambda i: {"n": n, "k": k, "C0": C0,
                                           "h": h[i].tolist()}, best)
    return count, best


def campaign_codazzi_ratio(rng, samples, n=3, k=2):
    """|T|^2 >= 3/(n+2) |tr T|^2 over random totally symmetric 3-tensors."""
    best = (np.inf, None)
    count = 0
    for b in _chunks(samples):
        T = rng.standard_normal((b, n, n, n, k))
        T = (T + T.transpose(0, 2, 1, 3, 4) + T.transpose(0, 1, 3, 2, 4)
             + T.transpose(0, 2, 3, 1, 4) + T.transpose(0, 3, 1, 2, 4)
             + T.transpose(0, 3, 2, 1, 4)) / 6.0
        trT = np.einsum("bijja->bia", T)
        Tsq = np.einsum("bijla,bijla->b", T, T)
        defects = (Tsq - 3.0 / (n + 2) * np.einsum("bia,bia->b", trT, trT)) / Tsq
        count += b
        best = _reduce(defects, lambda i: {"n": n, "k": k, "T": T[i].tolist()}, best)
    return count, best


def campaign_lemma23(rng, samples, n=3):
    """Cubic-moment bound over the cone lambda > 0, f0 < 1/(n(n-1))."""
    limit = 1.0 / (n * (n - 1))
    best = (np.inf, None)
    count = 0
    while count < samples:
        b = min(_CHUNK, 4 * (samples - count))
        # mixture: broad lognormal cloud plus a boundary-hugging perturbative family
        lam1 = np.exp(0.4 * rng.standard_normal((b // 2, n)))
        z = rng.standard_normal((b - b // 2, n))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = rng.uniform(0.0, 0.8, size=(b - b // 2, 1))
        lam2 = 1.0 + r * z
        lam = np.concatenate([lam1, lam2], axis=0)
        H = lam.sum(axis=1)
        keep = (lam > 0).all(axis=1) & (H > 0)
        lam, H = lam[keep], H[keep]
        normh_sq = np.einsum("bi,bi->b", lam, lam)
        f0 = (normh_sq - H * H / n) / (H * H)
        keep = f0 < limit * (1.0 - 1e-12)
        lam, H, normh_sq, f0 = lam[keep], H[keep], normh_sq[keep], f0[keep]
        if lam.shape[0] == 0:
            continue
        C = np.einsum("bi,bi,bi->b", lam, lam, lam)
        lhs = n * C - (1.0 + n * f0) * H * normh_sq
        rhs = f0 * (1.0 + n * f0) * (1.0 - np.sqrt(n * (n - 1) * f0)) * H**3
        defects = (lhs - rhs) / H**3
        count += lam.shape[0]
        best = _reduce(defects, lambda i: {"n": n, "lambda": lam[i].tolist()}, best)
    return count, best


def campaign_sphere_reaction(rng, samples, n=4, k=2, K_amb=1.0, beta2=0.9):
    """Perturbed reaction expression is negative on pinched non-umbilic samples."""
    consts = SpherePinchingConstants.for_dimension(n, beta=beta2 if n == 2 else None)
    a, b_, alpha, beta = consts.a, consts.b, consts.alpha, consts.beta
    best = (np.inf, None)
    count = 0
    while count < samples:
        bsz = min(_CHUNK, 2 * (samples - count))
        h = sample_symmetric(rng, bsz, n, k)
        normh_sq, H, normH_sq = batch_norms(h)
        # rescale into the pinched region |h|^2 <= alpha |H|^2 + beta K, biased
        # toward the tight part of the constraint
        u = rng.uniform(0.05, 1.0, size=bsz) ** 0.5
        slack = normh_sq - alpha * normH_sq
        s = np.where(slack > 0, np.sqrt(beta * K_amb * u / np.maximum(slack, 1e-300)), 1.0)
        h = h * s[:, None, None, None]
        normh_sq, H, normH_sq = batch_norms(h)
        keep = normh_sq <= alpha * normH_sq + beta * K_amb
        h, normh_sq, normH_sq = h[keep], normh_sq[keep], normH_sq[keep]
        ring_sq = np.maximum(normh_sq - normH_sq / n, 0.0)
        keep = ring_sq > 1e-14
        h, normh_sq, normH_sq, ring_sq = h[keep], normh_sq[keep], normH_sq[keep], ring_sq[keep]
        if h.shape[0] == 0:
            continue
        R1, R2 = batch_reaction_terms(h)
        denom = a * normH_sq + b_ * K_amb
        Rtilde = (denom * (R1 - R2 / n - n * K_amb * ring_sq)
                  - a * R2 * ring_sq - a * n * K_amb * ring_sq * normH_sq)
        defects = -Rtilde / (denom * ring_sq * np.maximum(normh_sq + K_amb, 1e-300))
        count += h.shape[0]
        best = _reduce(defects, lambda i: {"n": n, "k": k, "K_amb": K_amb,
                                           "h": h[i].tolist()}, best)
    return count, best


def campaign_peter_paul(rng, samples):
    """x^2 + 4xy + (3/2)y^2 <= (5/3)(x+y)^2 for x, y >= 0 (sharp at y = 2x)."""
    best = (np.inf, None)
    count = 0
    grid = np.linspace(0.0, 10.0, 2001)
    X, Y = np.meshgrid(grid, grid, sparse=False)
    x, y = X.ravel(), Y.ravel()
    for arr in (np.stack([x, y], axis=1),
                rng.uniform(0.0, 100.0, size=(max(samples - x.size, 0), 2))):
        if arr.shape[0] == 0:
            continue
        x_, y_ = arr[:, 0], arr[:, 1]
        defects = (5.0 / 3.0) * (x_ + y_) ** 2 - (x_**2 + 4 * x_ * y_ + 1.5 * y_**2)
        scale = np.maximum((x_ + y_) ** 2, 1.0)
        defects = defects / scale
        count += arr.shape[0]
        best = _reduce(defects, lambda i: {"x": float(x_[i]), "y": float(y_[i])}, best)
    return count, best


CAMPAIGNS = {
    "pinching-cone": (campaign_pinching_cone, 1e-9),
    "traceless-bound": (campaign_traceless_bound, 1e-9),
    "minimal-trace-free": (campaign_minimal_trace_free, 1e-9),
    "chen-sectional": (campaign_chen_sectional, 1e-9),
    "codazzi-ratio": (campaign_codazzi_ratio, 1e-9),
    "lemma23": (campaign_lemma23, 1e-12),
    "sphere-reaction": (campaign_sphere_reaction, 0.0),
    "peter-paul": (campaign_peter_paul, 1e-12),
}


def run_campaign(name: str, seed: int, samples: int, **params) -> CampaignReport:
    """Run a registered campaign; identical (name, seed, samples) reproduce the report."""
    if name not in CAMPAIGNS:
        raise PreconditionError(f"unknown campaign {name!r}; known: {sorted(CAMPAIGNS)}")
    if samples <= 0:
        raise PreconditionError("sample count must be positive")
    fn, tol = CAMPAIGNS[name]
    rng = np.random.default_rng(np.random.SeedSequence([seed, _stable_hash(name)]))
    count, (min_defect, argmin) = fn(rng, int(samples), **params)
    violations = int(min_defect < -tol)
    return CampaignReport(
        inequality=name, samples=count, seed=seed, tolerance=tol,
        min_defect=min_defect, violations=violations,
        argmin=argmin or {}, params={k: _plain(v) for k, v in params.items()},
    )


def _stable_hash(name: str) -> int:
    out = 0
    for ch in name:
        out = (out * 131 + ord(ch)) % (2**31 - 1)
    return out


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (tuple, list)):
        return [_plain(x) for x in v]
    return v
