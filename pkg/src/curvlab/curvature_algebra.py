"""Pointwise algebra of the second fundamental form in arbitrary codimension.

All quantities are evaluated in an orthonormal frame (metric = identity);
``orthonormalize`` reduces a general frame to this case.  The functions here
are pure and operate on a single curvature tensor; the vectorized sampling
campaigns that hammer the inequalities live in :mod:`curvlab.verification`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DegenerateCurvatureError(ValueError):
    """Raised when an operation requires |H| > 0 but the trace vanishes."""


class PreconditionError(ValueError):
    """Raised when an input violates a documented precondition."""


_SYM_TOL = 1e-10


@dataclass(frozen=True)
class SecondFundamentalForm:
    """Curvature tensor h[i, j, alpha] of an n-manifold in codimension k."""

    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.ndim != 3 or h.shape[0] != h.shape[1]:
            raise PreconditionError(f"expected shape (n, n, k), got {h.shape}")
        if h.shape[0] < 1 or h.shape[2] < 1:
            raise PreconditionError("need n >= 1 and k >= 1")
        if not np.allclose(h, h.transpose(1, 0, 2), atol=_SYM_TOL * (1.0 + np.abs(h).max())):
            raise PreconditionError("h must be symmetric in its first two indices")
        object.__setattr__(self, "h", 0.5 * (h + h.transpose(1, 0, 2)))

    @property
    def n(self) -> int:
        return self.h.shape[0]

    @property
    def k(self) -> int:
        return self.h.shape[2]

    def trace_vector(self) -> np.ndarray:
        """Mean curvature vector H_alpha = sum_i h[i, i, alpha]."""
        return np.einsum("iia->a", self.h)


@dataclass(frozen=True)
class AdaptedDecomposition:
    """Split of the traceless part along / orthogonal to the H direction."""

    normH: float
    ring1_diag: np.ndarray
    norm_ring1_sq: float
    norm_ringminus_sq: float


@dataclass(frozen=True)
class SpherePinchingConstants:
    """Constants (alpha, beta, b) of the sphere-ambient pinching condition."""

    n: int
    alpha: float
    beta: float
    b: float
    a: float = field(init=False)

    def __post_init__(self):
        if self.n < 2:
            raise PreconditionError("need n >= 2")
        object.__setattr__(self, "a", self.alpha - 1.0 / self.n)
        if self.n >= 4:
            ok = np.isclose(self.alpha, 1.0 / (self.n - 1)) and np.isclose(self.beta, 2.0) \
                and np.isclose(self.b, 11.0 / 10.0)
        elif self.n == 3:
            ok = np.isclose(self.alpha, 4.0 / 9.0) and np.isclose(self.beta, 3.0 / 2.0) \
                and np.isclose(self.b, 33.0 / 40.0)
        else:
            ok = self.beta < 12.0 / 13.0 and np.isclose(self.alpha, 2.0 / (4.0 - self.beta)) \
                and np.isclose(self.b, 24.0 * self.beta / (13.0 * (4.0 - self.beta)))
        if not ok:
            raise PreconditionError("constants inconsistent with the admissible table")

    @classmethod
    def for_dimension(cls, n: int, beta: float | None = None) -> "SpherePinchingConstants":
        if n >= 4:
            return cls(n=n, alpha=1.0 / (n - 1), beta=2.0, b=11.0 / 10.0)
        if n == 3:
            return cls(n=3, alpha=4.0 / 9.0, beta=1.5, b=33.0 / 40.0)
        if n == 2:
            if beta is None:
                raise PreconditionError("n = 2 requires a caller-supplied beta < 12/13")
            return cls(n=2, alpha=2.0 / (4.0 - beta), beta=beta,
                       b=24.0 * beta / (13.0 * (4.0 - beta)))
        raise PreconditionError("need n >= 2")


@dataclass(frozen=True)
class PinchingMonitorParams:
    """Exponent bookkeeping for the decaying integral monitor.

    eps0 is a configuration input: the literature only asserts its existence
    as a function of (C0, n), without a usable formula.
    """

    n: int
    C0: float
    eps0: float
    sigma: float
    p: float
    eps_nabla: float = field(init=False)

    def __post_init__(self):
        if self.C0 <= 0 or self.eps0 <= 0 or self.sigma <= 0 or self.p <= 0:
            raise PreconditionError("all parameters must be strictly positive")
        eps_nabla = 3.0 / (self.n + 2) - self.C0
        if eps_nabla <= 0:
            raise PreconditionError("need C0 < 3/(n+2)")
        object.__setattr__(self, "eps_nabla", eps_nabla)
        if self.p <= 16.0 / eps_nabla:
            raise PreconditionError("need p > 16/eps_nabla")
        if self.sigma > (self.eps0 / 8.0) * np.sqrt(eps_nabla / self.p):
            raise PreconditionError("sigma exceeds (eps0/8)*sqrt(eps_nabla/p)")
        if self.sigma * self.p <= self.n:
            raise PreconditionError("need sigma * p > n")


def orthonormalize(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Re-express h, given in a frame with Gram matrix g, in an orthonormal frame."""
    g = np.asarray(g, dtype=float)
    L = np.linalg.cholesky(g)
    A = np.linalg.inv(L).T  # columns of A are the new frame in old coordinates
    return np.einsum("pi,qj,pqa->ija", A, A, np.asarray(h, dtype=float))


def norms_and_traceless(form: SecondFundamentalForm, include_f0: bool = True):
    """Return (|h|^2, |H|^2, |h ring|^2, f0) with f0 = |h ring|^2 / |H|^2.

    f0 is only defined where the mean curvature vector does not vanish; with
    ``include_f0`` the degenerate case raises, otherwise f0 is None.
    """
    h = form.h
    normh_sq = float(np.einsum("ija,ija->", h, h))
    H = form.trace_vector()
    normH_sq = float(H @ H)
    ring_sq = max(normh_sq - normH_sq / form.n, 0.0)
    if include_f0:
        if normH_sq == 0.0:
            raise DegenerateCurvatureError("f0 undefined at |H| = 0")
        return normh_sq, normH_sq, ring_sq, ring_sq / normH_sq
    return normh_sq, normH_sq, ring_sq, None


def traceless_part(form: SecondFundamentalForm) -> np.ndarray:
    H = form.trace_vector()
    ring = form.h.copy()
    idx = np.arange(form.n)
    ring[idx, idx, :] -= H / form.n
    return ring


def adapted_decompose(form: SecondFundamentalForm) -> AdaptedDecomposition:
    """Split h ring into its component along H/|H| and the orthogonal rest."""
    H = form.trace_vector()
    normH = float(np.linalg.norm(H))
    if normH == 0.0:
        raise DegenerateCurvatureError("adapted frame needs |H| > 0")
    nu1 = H / normH
    ring = traceless_part(form)
    ring1 = np.einsum("ija,a->ij", ring, nu1)
    diag = np.linalg.eigvalsh(ring1)
    norm_ring1_sq = float(np.sum(ring1 * ring1))
    ring_sq = float(np.sum(ring * ring))
    return AdaptedDecomposition(
        normH=normH,
        ring1_diag=diag,
        norm_ring1_sq=norm_ring1_sq,
        norm_ringminus_sq=max(ring_sq - norm_ring1_sq, 0.0),
    )


def reaction_terms(form: SecondFundamentalForm) -> tuple[float, float]:
    """Reaction terms (R1, R2) of the evolution of |h|^2 and |H|^2.

    R1 = sum_{ab} (sum_{ij} h_ija h_ijb)^2
         + sum_{ijab} (sum_p h_ipa h_jpb - h_jpa h_ipb)^2,
    R2 = sum_{ij} (sum_a H_a h_ija)^2.
    """
    h = form.h
    S = np.einsum("ija,ijb->ab", h, h)
    M = np.einsum("ipa,jpb->ijab", h, h)
    comm_sq = float(np.sum((M - M.transpose(1, 0, 2, 3)) ** 2))
    R1 = float(np.sum(S * S)) + comm_sq
    H = form.trace_vector()
    T = np.einsum("a,ija->ij", H, h)
    R2 = float(np.sum(T * T))
    return R1, R2


def euclidean_pinching_threshold(n: int) -> float:
    """Largest admissible pinching constant for flat ambient space."""
    if n < 2:
        raise PreconditionError("need n >= 2")
    return 1.0 / (n - 1) if n >= 4 else 4.0 / (3.0 * n)


def pinching_reaction_defect(form: SecondFundamentalForm, C0: float) -> float:
    """Signed defect R1 - C0 * R2 of the reaction ODE on the pinching cone."""
    normh_sq, normH_sq, _, _ = norms_and_traceless(form, include_f0=False)
    if C0 > euclidean_pinching_threshold(form.n) + 1e-12:
        raise PreconditionError("C0 above the admissible threshold")
    scale = max(normh_sq, 1e-300)
    if normh_sq > C0 * normH_sq * (1.0 + 1e-9) + 1e-12 * scale:
        raise PreconditionError("input violates |h|^2 <= C0 |H|^2")
    R1, R2 = reaction_terms(form)
    return R1 - C0 * R2


def traceless_reaction_bound_defect(form: SecondFundamentalForm) -> float:
    """Defect of the adapted-frame upper bound on R1 - R2/n (nonnegative in theory)."""
    dec = adapted_decompose(form)
    r1sq, rmsq = dec.norm_ring1_sq, dec.norm_ringminus_sq
    rhs = r1sq**2 + r1sq * dec.normH**2 / form.n + 4.0 * r1sq * rmsq + 1.5 * rmsq**2
    R1, R2 = reaction_terms(form)
    return rhs - (R1 - R2 / form.n)


def sphere_reaction_defect(form: SecondFundamentalForm, K_amb: float,
                           consts: SpherePinchingConstants) -> float:
    """Reaction expression of the perturbed pinching function in a round ambient space.

    Negative on pinched non-umbilic data; zero when the traceless part vanishes.
    """
    if K_amb <= 0:
        raise PreconditionError("ambient curvature must be positive")
    if form.n != consts.n:
        raise PreconditionError("dimension mismatch with the constants table")
    normh_sq, normH_sq, ring_sq, _ = norms_and_traceless(form, include_f0=False)
    bound = consts.alpha * normH_sq + consts.beta * K_amb
    if normh_sq > bound * (1.0 + 1e-9):
        raise PreconditionError("input violates |h|^2 <= alpha |H|^2 + beta K")
    R1, R2 = reaction_terms(form)
    a, b, n = consts.a, consts.b, form.n
    denom = a * normH_sq + b * K_amb
    return (denom * (R1 - R2 / n - n * K_amb * ring_sq)
            - a * R2 * ring_sq - a * n * K_amb * ring_sq * normH_sq)


def minimal_R1_bound_defect(form: SecondFundamentalForm) -> float:
    """(3/2)|h|^4 - R1 for trace-free h (the H = 0 case)."""
    H = form.trace_vector()
    normh_sq = float(np.einsum("ija,ija->", form.h, form.h))
    if float(H @ H) > 1e-18 * max(normh_sq, 1.0):
        raise PreconditionError("requires vanishing trace in every normal direction")
    R1, _ = reaction_terms(form)
    return 1.5 * normh_sq**2 - R1


def sectional_curvature(form: SecondFundamentalForm, x: np.ndarray, y: np.ndarray) -> float:
    """Gauss-equation sectional curvature of the plane spanned by orthonormal x, y."""
    h = form.h
    hxx = np.einsum("ija,i,j->a", h, x, x)
    hyy = np.einsum("ija,i,j->a", h, y, y)
    hxy = np.einsum("ija,i,j->a", h, x, y)
    return float(hxx @ hyy - hxy @ hxy)


def chen_sectional_defect(form: SecondFundamentalForm, C0: float,
                          n_random_planes: int = 0, rng=None) -> float:
    """Minimum over sampled 2-planes of K_plane - (1/2)(1/(n-1) - C0) |H|^2."""
    n = form.n
    if n < 2:
        raise PreconditionError("sectional curvature needs n >= 2")
    if C0 > 1.0 / (n - 1) + 1e-12:
        raise PreconditionError("C0 above 1/(n-1)")
    normh_sq, normH_sq, _, _ = norms_and_traceless(form, include_f0=False)
    if normh_sq > C0 * normH_sq * (1.0 + 1e-9) + 1e-12 * max(normh_sq, 1e-300):
        raise PreconditionError("input violates |h|^2 <= C0 |H|^2")
    bound = 0.5 * (1.0 / (n - 1) - C0) * normH_sq
    eye = np.eye(n)
    best = np.inf
    for i in range(n):
        for j in range(i + 1, n):
            best = min(best, sectional_curvature(form, eye[i], eye[j]) - bound)
    if n_random_planes:
        rng = np.random.default_rng(rng)
        for _ in range(n_random_planes):
            q, _ = np.linalg.qr(rng.standard_normal((n, 2)))
            best = min(best, sectional_curvature(form, q[:, 0], q[:, 1]) - bound)
    return best


def codazzi_gradient_ratio(T: np.ndarray) -> float:
    """|T|^2 - 3/(n+2) |tr T|^2 for a totally symmetric normal-valued 3-tensor."""
    T = np.asarray(T, dtype=float)
    if T.ndim != 4 or not (T.shape[0] == T.shape[1] == T.shape[2]):
        raise PreconditionError(f"expected shape (n, n, n, k), got {T.shape}")
    scale = 1.0 + np.abs(T).max()
    for perm in ((1, 0, 2, 3), (0, 2, 1, 3)):
        if not np.allclose(T, T.transpose(*perm), atol=1e-10 * scale):
            raise PreconditionError("T must be totally symmetric in its spatial indices")
    n = T.shape[0]
    trT = np.einsum("ijja->ia", T)
    return float(np.sum(T * T) - 3.0 / (n + 2) * np.sum(trT * trT))


def codazzi_sharpness_infimum(n: int, k: int = 1, starts: int = 8, rng=None) -> float:
    """Numerically minimize (n+2)|T|^2 / (3 |tr T|^2) over symmetric T; infimum is 1."""
    from scipy.optimize import minimize

    rng = np.random.default_rng(rng)

    def symmetrize(T):
        return (T + T.transpose(1, 0, 2, 3) + T.transpose(0, 2, 1, 3)
                + T.transpose(1, 2, 0, 3) + T.transpose(2, 0, 1, 3)
                + T.transpose(2, 1, 0, 3)) / 6.0

    def ratio(x):
        T = symmetrize(x.reshape(n, n, n, k))
        trT = np.einsum("ijja->ia", T)
        denom = np.sum(trT * trT)
        if denom < 1e-14:
            return 1e6
        return (n + 2) * np.sum(T * T) / (3.0 * denom)

    best = np.inf
    for _ in range(starts):
        x0 = rng.standard_normal(n * n * n * k)
        res = minimize(ratio, x0, method="Nelder-Mead",
                       options={"maxiter": 20000, "xatol": 1e-10, "fatol": 1e-12})
        best = min(best, res.fun)
    return float(best)


def amc_lemma23_defect(lam: np.ndarray) -> float:
    """Defect of the cubic-moment lower bound for pinched positive principal curvatures.

    LHS = n*C - (1 + n f0) H |h|^2 with C = sum lambda_i^3,
    RHS = f0 (1 + n f0)(1 - sqrt(n(n-1) f0)) H^3; returns LHS - RHS.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    if n < 2:
        raise PreconditionError("need at least two principal curvatures")
    if np.any(lam <= 0):
        raise PreconditionError("principal curvatures must be positive")
    H = lam.sum()
    normh_sq = float(np.sum(lam * lam))
    f0 = (normh_sq - H * H / n) / (H * H)
    if f0 >= 1.0 / (n * (n - 1)):
        raise PreconditionError("pinching f0 < 1/(n(n-1)) violated")
    C = float(np.sum(lam**3))
    lhs = n * C - (1.0 + n * f0) * H * normh_sq
    rhs = f0 * (1.0 + n * f0) * (1.0 - np.sqrt(n * (n - 1) * f0)) * H**3
    return lhs - rhs


def amc_simplified_rhs_defect(lam: np.ndarray) -> float:
    """Defect of the simplified consequence RHS >= (1/2) f0 H^3 (valid for small f0)."""
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    if np.any(lam <= 0):
        raise PreconditionError("principal curvatures must be positive")
    H = lam.sum()
    f0 = (float(np.sum(lam * lam)) - H * H / n) / (H * H)
    rhs = f0 * (1.0 + n * f0) * (1.0 - np.sqrt(n * (n - 1) * f0)) * H**3
    return rhs - 0.5 * f0 * H**3
