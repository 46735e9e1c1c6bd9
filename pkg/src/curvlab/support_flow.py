"""Flow solver for convex hypersurfaces in support-function parametrization.

Two discretizations: planar closed curves (support function on uniform angles,
spectral derivatives) and axisymmetric surfaces (support function of the polar
angle on a cell-centered grid, 4th-order finite differences with even pole
extension).  The evolution is du/dt = -f(principal curvatures) for any speed
from :mod:`curvlab.speed_functions`, integrated by explicit RK4 with adaptive
step rejection.  Monitors: inradius/circumradius (exact LPs on the support
grid), speed suprema, pinching ratio, decay-law fits and the rescaled-flow
functionals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .curvature_algebra import PreconditionError
from .speed_functions import SpeedFunction

PLANAR = "planar"
AXISYMMETRIC = "axisymmetric"


class ConvexityError(RuntimeError):
    """Strict convexity lost; carries the first offending node."""

    def __init__(self, node: int, value: float):
        super().__init__(f"convexity lost at node {node} (curvature radius {value:.3e})")
        self.node = node
        self.value = value


class StepFailure(RuntimeError):
    """Step size collapsed below dt_min; carries a diagnostic snapshot."""

    def __init__(self, msg: str, state: "SupportState"):
        super().__init__(msg)
        self.state = state


@dataclass
class SupportState:
    """Support function sample of a convex body at one time instant."""

    kind: str
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.kind not in (PLANAR, AXISYMMETRIC):
            raise PreconditionError(f"unknown kind {self.kind!r}")
        self.u = np.asarray(self.u, dtype=float).copy()

    @property
    def N(self) -> int:
        return self.u.size

    @property
    def dim(self) -> int:
        """Hypersurface dimension n (1 for curves, 2 for surfaces)."""
        return 1 if self.kind == PLANAR else 2

    @property
    def angles(self) -> np.ndarray:
        N = self.N
        if self.kind == PLANAR:
            return 2.0 * np.pi * np.arange(N) / N
        return (np.arange(N) + 0.5) * np.pi / N

    def copy(self) -> "SupportState":
        return SupportState(self.kind, self.u.copy(), self.t)


@dataclass
class RadiiPair:
    rho_minus: float
    rho_plus: float
    center_minus: np.ndarray
    center_plus: np.ndarray
    converged: bool = True

    def __post_init__(self):
        if self.converged and not (0.0 < self.rho_minus <= self.rho_plus * (1 + 1e-12)):
            raise PreconditionError("inconsistent radii")


@dataclass
class TimeSeriesRecord:
    t: float
    rho_minus: float
    rho_plus: float
    supF: float
    pinch_ratio: float
    area_or_volume: float
    eta_p: float
    f_sigma_max: float
    u: np.ndarray
    steiner: np.ndarray


@dataclass
class FlowRunConfig:
    speed: SpeedFunction
    initial: SupportState
    dt_safety: float = 0.4
    stop_inradius: float = 0.05
    record_every: int = 20
    eta_p: float | None = None
    f_sigma: float | None = None
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.initial.N < 64:
            raise PreconditionError("grid too coarse: need N >= 64")
        if not 0.0 < self.dt_safety <= 0.5:
            raise PreconditionError("dt_safety must lie in (0, 0.5]")
        if self.speed.n != self.initial.dim:
            raise PreconditionError("speed arity does not match the hypersurface dimension")


@dataclass
class FlowRun:
    records: list
    final: SupportState
    extinction_time: float
    extinction_fit_ok: bool


# ---------------------------------------------------------------------------
# initial data

def round_state(kind: str, radius: float, N: int) -> SupportState:
    return SupportState(kind, np.full(N, float(radius)))


def ellipse_state(a: float, b: float, N: int) -> SupportState:
    th = 2.0 * np.pi * np.arange(N) / N
    return SupportState(PLANAR, np.sqrt(a**2 * np.cos(th) ** 2 + b**2 * np.sin(th) ** 2))


def spheroid_state(a: float, b: float, N: int) -> SupportState:
    """Surface of revolution with polar semi-axis a and equatorial semi-axis b."""
    ph = (np.arange(N) + 0.5) * np.pi / N
    return SupportState(AXISYMMETRIC,
                        np.sqrt(a**2 * np.cos(ph) ** 2 + b**2 * np.sin(ph) ** 2))


def trig_poly_state(rng, N: int, modes: int = 4, amplitude: float = 0.25) -> SupportState:
    """Random strictly convex planar body: 1 + small trigonometric polynomial."""
    rng = np.random.default_rng(rng)
    th = 2.0 * np.pi * np.arange(N) / N
    u = np.ones(N)
    for m in range(2, modes + 2):
        # keep u'' + u > 0: each mode contributes amplitude * (m^2 - 1) at worst
        c = amplitude / (modes * (m**2 - 1))
        u += c * rng.uniform(-1, 1) * np.cos(m * th) + c * rng.uniform(-1, 1) * np.sin(m * th)
    return SupportState(PLANAR, u)


# ---------------------------------------------------------------------------
# differentiation and curvature

def _spectral_derivatives(u: np.ndarray):
    N = u.size
    freq = np.fft.rfftfreq(N, d=1.0 / N)
    uh = np.fft.rfft(u)
    du = np.fft.irfft(1j * freq * uh, n=N)
    d2u = np.fft.irfft(-(freq**2) * uh, n=N)
    return du, d2u


def drop_nyquist(u: np.ndarray) -> np.ndarray:
    """Zero the unpaired highest mode (even N): its first derivative cannot be
    represented on the grid, which breaks discrete summation by parts."""
    if u.size % 2:
        return u
    uh = np.fft.rfft(u)
    uh[-1] = 0.0
    return np.fft.irfft(uh, n=u.size)


def _even_extended_derivatives(u: np.ndarray):
    """4th-order first/second derivatives on the cell-centered polar grid."""
    N = u.size
    dphi = np.pi / N
    ext = np.concatenate([u[1::-1], u, u[:-3:-1]])  # two mirrored ghosts each side
    i = np.arange(2, N + 2)
    du = (ext[i - 2] - 8 * ext[i - 1] + 8 * ext[i + 1] - ext[i + 2]) / (12 * dphi)
    d2u = (-ext[i - 2] + 16 * ext[i - 1] - 30 * ext[i] + 16 * ext[i + 1] - ext[i + 2]) \
        / (12 * dphi**2)
    return du, d2u


_cot_cache: dict = {}
_freq_sq_cache: dict = {}


def _cot_polar(N: int) -> np.ndarray:
    if N not in _cot_cache:
        _cot_cache[N] = 1.0 / np.tan((np.arange(N) + 0.5) * np.pi / N)
    return _cot_cache[N]


def _neg_freq_sq(N: int) -> np.ndarray:
    if N not in _freq_sq_cache:
        _freq_sq_cache[N] = -np.fft.rfftfreq(N, d=1.0 / N) ** 2
    return _freq_sq_cache[N]


def _radii_raw(kind: str, u: np.ndarray):
    """Curvature radii from a bare support sample; raises on convexity loss."""
    if kind == PLANAR:
        N = u.size
        d2u = np.fft.irfft(_neg_freq_sq(N) * np.fft.rfft(u), n=N)
        radii = (d2u + u,)
    else:
        du, d2u = _even_extended_derivatives(u)
        radii = (d2u + u, du * _cot_polar(u.size) + u)
    for r in radii:
        ok = (r > 0) & np.isfinite(r)
        if not ok.all():
            bad = int(np.flatnonzero(~ok)[0])
            raise ConvexityError(bad, float(r[bad]))
    return radii


def curvature_radii(state: SupportState):
    """Per-node principal curvature radii; raises on convexity loss."""
    return _radii_raw(state.kind, state.u)


def principal_curvatures(state: SupportState) -> np.ndarray:
    """Array of shape (n, N) with the principal curvatures at each node."""
    radii = curvature_radii(state)
    return np.vstack([1.0 / r for r in radii])


def speed_values(state: SupportState, speed: SpeedFunction) -> np.ndarray:
    return speed.batch(principal_curvatures(state))


# ---------------------------------------------------------------------------
# stepping

def _dt_from_radii(kind: str, N: int, radii, degree: float, dt_safety: float) -> float:
    """Explicit-stability step: diffusion coefficient ~ alpha r^-(alpha+1).

    The coefficient in front reflects the highest resolvable mode of each
    discretization (N/2 for the spectral planar grid), so dt_safety = 0.5
    sits at about the RK4 stability boundary.
    """
    rmin = min(float(r.min()) for r in radii)
    alpha = max(degree, 1e-3)
    if kind == PLANAR:
        # RK4 real-axis limit 2.8 at mode N/2: dt <= 2.8 (2/N)^2 r^(a+1)/a
        return dt_safety * 22.4 / N**2 * rmin ** (degree + 1.0) / alpha
    return dt_safety * (np.pi / N) ** 2 * rmin ** (degree + 1.0) / alpha


def suggest_dt(state: SupportState, speed: SpeedFunction, dt_safety: float) -> float:
    radii = curvature_radii(state)
    return _dt_from_radii(state.kind, state.N, radii, speed.degree, dt_safety)


def _rhs_raw(kind: str, u: np.ndarray, speed: SpeedFunction) -> np.ndarray:
    radii = _radii_raw(kind, u)
    lam = np.empty((len(radii), u.size))
    for i, r in enumerate(radii):
        np.divide(1.0, r, out=lam[i])
    return -speed.batch(lam)


def _rk4_raw(kind: str, u: np.ndarray, speed: SpeedFunction, dt: float) -> np.ndarray:
    k1 = _rhs_raw(kind, u, speed)
    k2 = _rhs_raw(kind, u + 0.5 * dt * k1, speed)
    k3 = _rhs_raw(kind, u + 0.5 * dt * k2, speed)
    k4 = _rhs_raw(kind, u + dt * k3, speed)
    unew = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    _radii_raw(kind, unew)  # convexity / finiteness validation
    return unew


def step(state: SupportState, speed: SpeedFunction, dt: float) -> SupportState:
    """One explicit RK4 step of du/dt = -f(curvatures); convexity re-validated."""
    return SupportState(state.kind, _rk4_raw(state.kind, state.u, speed, dt),
                        state.t + dt)


def enclosed_measure(state: SupportState) -> float:
    """Enclosed area (planar) or volume (axisymmetric)."""
    if state.kind == PLANAR:
        du, _ = _spectral_derivatives(state.u)
        return float(0.5 * np.sum(state.u**2 - du**2) * 2.0 * np.pi / state.N)
    r1, r2 = curvature_radii(state)
    ph = state.angles
    return float((2.0 * np.pi / 3.0) * np.sum(state.u * r1 * r2 * np.sin(ph)) * np.pi / state.N)


# ---------------------------------------------------------------------------
# radii, Steiner point, monitors

def _direction_matrix(state: SupportState) -> np.ndarray:
    if state.kind == PLANAR:
        th = state.angles
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    return np.cos(state.angles)[:, None]  # axis component only, by symmetry


def steiner_point(state: SupportState) -> np.ndarray:
    """Area-averaged center; a reliable interior point for convex bodies."""
    dirs = _direction_matrix(state)
    if state.kind == PLANAR:
        w = np.full(state.N, 1.0 / state.N)
        return 2.0 * (w * state.u) @ dirs
    ph = state.angles
    w = np.sin(ph) * np.pi / state.N / 2.0
    return 3.0 * (w * state.u) @ dirs


def radii_from_support(dirs: np.ndarray, u: np.ndarray) -> RadiiPair:
    """Exact inradius/circumradius of the support-constraint polytope via two LPs.

    circumradius: min R s.t. <z, d_j> + R >= u_j; inradius: max r with
    <z, d_j> + r <= u_j.
    """
    m, d = dirs.shape
    # variables (z, R)
    c_plus = np.zeros(d + 1)
    c_plus[-1] = 1.0
    A = np.hstack([-dirs, -np.ones((m, 1))])
    res_p = linprog(c_plus, A_ub=A, b_ub=-u, bounds=[(None, None)] * (d + 1),
                    method="highs")
    c_minus = np.zeros(d + 1)
    c_minus[-1] = -1.0
    A2 = np.hstack([dirs, np.ones((m, 1))])
    res_m = linprog(c_minus, A_ub=A2, b_ub=u, bounds=[(None, None)] * (d + 1),
                    method="highs")
    ok = res_p.status == 0 and res_m.status == 0
    return RadiiPair(
        rho_minus=float(res_m.x[-1]) if res_m.x is not None else float("nan"),
        rho_plus=float(res_p.x[-1]) if res_p.x is not None else float("nan"),
        center_minus=res_m.x[:-1] if res_m.x is not None else np.full(d, np.nan),
        center_plus=res_p.x[:-1] if res_p.x is not None else np.full(d, np.nan),
        converged=ok,
    )


def radii(state: SupportState) -> RadiiPair:
    return radii_from_support(_direction_matrix(state), state.u)


def pinching_ratio(state: SupportState) -> float:
    """max over nodes of lambda_max/lambda_min; for curves, the radii-ratio proxy."""
    if state.kind == PLANAR:
        rp = radii(state)
        return rp.rho_plus / rp.rho_minus
    lam = principal_curvatures(state)
    return float((lam.max(axis=0) / lam.min(axis=0)).max())


def f_sigma_monitor(state: SupportState, sigma: float) -> float:
    """max over nodes of |h ring|^2 / H^(2 - sigma)."""
    lam = principal_curvatures(state)
    H = lam.sum(axis=0)
    if np.any(H <= 0):
        raise PreconditionError("mean curvature must be positive")
    n = state.dim
    ring_sq = np.sum(lam * lam, axis=0) - H * H / n
    return float((np.maximum(ring_sq, 0.0) / H ** (2.0 - sigma)).max())


def eta_functional(state: SupportState, speed: SpeedFunction, p: float) -> float:
    """Integral of K (eta^p - eta0^p) with eta = |W|/F; zero exactly on spheres."""
    if speed.degree != 1.0:
        raise PreconditionError("eta functional requires a 1-homogeneous speed")
    lam = principal_curvatures(state)
    F = speed_values(state, speed)
    eta = np.sqrt(np.sum(lam * lam, axis=0)) / F
    eta0 = math.sqrt(state.dim) / speed(np.ones(state.dim))
    vals = eta**p - eta0**p
    if state.kind == PLANAR:
        return float(np.sum(vals) * 2.0 * np.pi / state.N)
    ph = state.angles
    return float(2.0 * np.pi * np.sum(vals * np.sin(ph)) * np.pi / state.N)


def _record(state: SupportState, speed: SpeedFunction,
            eta_p: float | None, f_sigma: float | None) -> TimeSeriesRecord:
    rp = radii(state)
    return TimeSeriesRecord(
        t=state.t,
        rho_minus=rp.rho_minus,
        rho_plus=rp.rho_plus,
        supF=float(speed_values(state, speed).max()),
        pinch_ratio=pinching_ratio(state),
        area_or_volume=enclosed_measure(state),
        eta_p=(eta_functional(state, speed, eta_p) if eta_p is not None else float("nan")),
        f_sigma_max=(f_sigma_monitor(state, f_sigma) if f_sigma is not None else float("nan")),
        u=state.u.copy(),
        steiner=steiner_point(state),
    )


def evolve(config: FlowRunConfig) -> FlowRun:
    """Adaptive run until the circumradius falls below the stop threshold."""
    speed = config.speed
    state = config.initial.copy()
    kind, N = state.kind, state.N
    r0 = radii(state)
    dt_min = 1e-12 * r0.rho_plus ** (speed.degree + 1.0)
    records = [_record(state, speed, config.eta_p, config.f_sigma)]
    u, t = state.u, state.t
    steps = 0
    while steps < config.max_steps:
        dt = _dt_from_radii(kind, N, _radii_raw(kind, u), speed.degree,
                            config.dt_safety)
        while True:
            try:
                unew = _rk4_raw(kind, u, speed, dt)
                break
            except ConvexityError:
                dt *= 0.5
                if dt < dt_min:
                    raise StepFailure(
                        f"step size collapsed below {dt_min:.3e} at t = {t:.6e}",
                        SupportState(kind, u, t))
        u, t = unew, t + dt
        steps += 1
        if steps % config.record_every == 0:
            state = SupportState(kind, u, t)
            rec = _record(state, speed, config.eta_p, config.f_sigma)
            records.append(rec)
            if rec.rho_plus < config.stop_inradius:
                break
    state = SupportState(kind, u, t)
    T, ok = extinction_fit(records, speed.degree)
    return FlowRun(records=records, final=state, extinction_time=T, extinction_fit_ok=ok)


def extinction_fit(records, alpha: float):
    """Extinction time from the linear-in-t tail of rho_plus^(alpha+1)."""
    if len(records) < 4:
        return float("nan"), False
    ts = np.array([r.t for r in records])
    rho = np.array([r.rho_plus for r in records])
    # the law is exact only once the body is nearly round; fit where rho_plus
    # is within a factor 2 of its final value (at least the last 4 records)
    tail = rho <= 2.0 * rho.min()
    if tail.sum() < 4:
        tail = np.zeros(len(ts), dtype=bool)
        tail[-4:] = True
    ts, y = ts[tail], rho[tail] ** (alpha + 1.0)
    A = np.vstack([ts, np.ones_like(ts)]).T
    (slope, intercept), res, *_ = np.linalg.lstsq(A, y, rcond=None)
    if slope >= 0:
        return float("nan"), False
    T = -intercept / slope
    resid = float(np.sqrt(np.mean((A @ [slope, intercept] - y) ** 2)))
    ok = resid < 5e-3 * float(np.ptp(y)) if np.ptp(y) > 0 else False
    return float(T), ok


def speed_decay_fit(records, T: float):
    """Log-log slope of sup F against (T - t), plus the normalized band.

    Returns (slope, band_min, band_max) where the band is
    sup F * (T - t)^(alpha/(1+alpha)) -- the caller supplies alpha via the
    band exponent baked into T's flow; here the band uses the fitted slope.
    """
    ts = np.array([r.t for r in records])
    supF = np.array([r.supF for r in records])
    rem = T - ts
    keep = rem > 0
    ts, supF, rem = ts[keep], supF[keep], rem[keep]
    if rem.size >= 4 and rem.max() / rem.min() >= 100.0:
        # drop the shape-dependent transient: fit the later half in log(T - t)
        tail = rem <= math.sqrt(rem.max() * rem.min())
        ts, supF, rem = ts[tail], supF[tail], rem[tail]
    if np.ptp(supF) == 0 or rem.size < 4 or rem.max() / rem.min() < 10.0:
        raise PreconditionError("need at least one decade of (T - t) with varying sup F")
    A = np.vstack([np.log(rem), np.ones_like(rem)]).T
    (slope, _), *_ = np.linalg.lstsq(A, np.log(supF), rcond=None)
    band = supF * rem ** (-slope)
    return float(slope), float(band.min()), float(band.max())


def diameter_bound_check(records, T: float, alpha: float, normalized: bool = True):
    """Bounds of the radii against the sphere rate (T - t)^(1/(alpha+1)).

    Returns a dict with the min/max of rho_plus and rho_minus divided by the
    sphere rate, and (for normalized speeds) the worst signed defects of the
    two-sided sphere comparison rho_minus <= ((alpha+1)(T-t))^(1/(alpha+1))
    <= rho_plus.
    """
    if not records:
        raise PreconditionError("empty series")
    ts = np.array([r.t for r in records])
    rm = np.array([r.rho_minus for r in records])
    rp = np.array([r.rho_plus for r in records])
    rem = T - ts
    keep = rem > 0
    ts, rm, rp, rem = ts[keep], rm[keep], rp[keep], rem[keep]
    if rem.size == 0:
        raise PreconditionError("no records before the extinction time")
    rate = rem ** (1.0 / (alpha + 1.0))
    out = {
        "rho_plus_over_rate": (float((rp / rate).min()), float((rp / rate).max())),
        "rho_minus_over_rate": (float((rm / rate).min()), float((rm / rate).max())),
    }
    if normalized:
        sphere = ((alpha + 1.0) * rem) ** (1.0 / (alpha + 1.0))
        out["comparison_lower_defect"] = float((sphere - rm).min())
        out["comparison_upper_defect"] = float((rp - sphere).min())
    return out


def rescale_alpha1(records, T: float, extinction_point: np.ndarray | None = None):
    """Rescaled series for 1-homogeneous flows: tau = -log(T-t)/2, u scaled by sqrt(2(T-t)).

    The extinction point defaults to the Steiner point of the last record.
    """
    if not records:
        raise PreconditionError("empty series")
    kind = PLANAR if records[0].steiner.size == 2 else AXISYMMETRIC
    p = records[-1].steiner if extinction_point is None else np.asarray(extinction_point)
    out = []
    for rec in records:
        rem = T - rec.t
        if rem <= 0:
            continue
        tau = -0.5 * np.log(rem)
        st = SupportState(kind, rec.u, rec.t)
        shift = _direction_matrix(st) @ p
        out.append((tau, SupportState(kind, (rec.u - shift) / np.sqrt(2.0 * rem), rec.t)))
    return out


# ---------------------------------------------------------------------------
# explicit ancient fixture

def angenent_oval_sample(t: float, N: int) -> np.ndarray:
    """N points on the closed convex curve cosh y = exp(-t) cos x (t < 0)."""
    if t >= 0:
        raise PreconditionError("the oval exists for t < 0 only")
    xm = math.acos(math.exp(t))
    s = 2.0 * np.pi * np.arange(N) / N
    x = xm * np.cos(s)
    arg = np.maximum(np.exp(-t) * np.cos(x), 1.0)
    y = np.sign(np.sin(s)) * np.arccosh(arg)
    return np.stack([x, y], axis=1)


def angenent_consistency_residual(t: float, delta: float = 1e-4, N: int = 512) -> float:
    """Max |normal velocity - curvature| over the sampled oval.

    Velocity by root-finding along the outward normal onto the curve at
    t + delta; curvature by the three-point circumcircle of neighbors.
    Validates the implicit solution formula independently of any flow code.
    """
    pts = angenent_oval_sample(t, N)
    res = []
    for j in range(N):
        p_prev, p, p_next = pts[j - 1], pts[j], pts[(j + 1) % N]
        a = np.linalg.norm(p - p_prev)
        b = np.linalg.norm(p_next - p)
        c = np.linalg.norm(p_next - p_prev)
        area2 = abs((p[0] - p_prev[0]) * (p_next[1] - p_prev[1])
                    - (p[1] - p_prev[1]) * (p_next[0] - p_prev[0]))
        kappa = 2.0 * area2 / (a * b * c)
        x, y = p
        gx = math.exp(-t) * math.sin(x)
        gy = math.sinh(y)
        norm = math.hypot(gx, gy)
        if norm < 1e-10:
            continue
        nx, ny = gx / norm, gy / norm  # outward for G = cosh y - e^-t cos x
        s = 0.0
        for _ in range(50):
            G = math.cosh(y + s * ny) - math.exp(-(t + delta)) * math.cos(x + s * nx)
            dG = (math.sinh(y + s * ny) * ny
                  + math.exp(-(t + delta)) * math.sin(x + s * nx) * nx)
            ds = -G / dG
            s += ds
            if abs(ds) < 1e-14:
                break
        v_inward = -s / delta  # shrinking: the curve moves against the outward normal
        res.append(abs(v_inward - kappa))
    return float(max(res))
