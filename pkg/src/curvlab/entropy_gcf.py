"""Entropy machinery for volume-normalized Gauss-curvature power flows.

Convex bodies are handled in the Gauss-map parametrization of
:mod:`curvlab.support_flow`: all integrals over the hypersurface use the
change of variables d(mu) = K^{-1} d(theta), with theta the (solid-angle)
normal coordinate.  The entropy E_beta(Omega) is the supremum over interior
centers z of a log/power average of the support function u_z; the rescaled
flow d(u)/d(tau) = -K^beta / fbar + u is volume-renormalized exactly after
every step, which keeps the surface-measure identity (the sigma-integral
equals the sphere measure omega_n) at machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curvature_algebra import PreconditionError
from . import support_flow as sfl
from .support_flow import PLANAR, SupportState


class EntropyDomainError(PreconditionError):
    """Center outside the body, or beta outside the admissible range."""


@dataclass(frozen=True)
class EntropyEvaluation:
    beta: float
    value: float
    center: np.ndarray
    branch: str  # "log" for beta = 1, "power" otherwise


@dataclass
class RescaledGCFState:
    state: SupportState
    tau: float

    @property
    def target_volume(self) -> float:
        n = self.state.dim
        return _omega_n(n) / (n + 1.0)


def _omega_n(n: int) -> float:
    return 2.0 * np.pi if n == 1 else 4.0 * np.pi


def _quadrature(state: SupportState):
    """(directions, weights) with sum(w) = omega_n for the normal coordinate."""
    N = state.N
    if state.kind == PLANAR:
        th = state.angles
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        w = np.full(N, 2.0 * np.pi / N)
    else:
        ph = state.angles
        dirs = np.cos(ph)[:, None]
        w = 2.0 * np.pi * np.sin(ph) * np.pi / N
    return dirs, w


def min_beta(n: int) -> float:
    """Smallest admissible Gauss-curvature power, 1/(n+2)."""
    return 1.0 / (n + 2.0)


def _check_beta(beta: float, n: int, allow_small: bool):
    if beta <= 0:
        raise EntropyDomainError("beta must be positive")
    if beta < min_beta(n) - 1e-12 and not allow_small:
        raise EntropyDomainError(
            f"beta below 1/(n+2) = {min_beta(n):g}; pass allow_small_beta=True "
            "to experiment outside the supported range")


def body_volume(state: SupportState) -> float:
    """Enclosed area (planar) or volume (axisymmetric)."""
    return sfl.enclosed_measure(state)


def gauss_curvature(state: SupportState) -> np.ndarray:
    """Per-node Gauss curvature, the reciprocal product of curvature radii."""
    radii = sfl.curvature_radii(state)
    out = np.ones(state.N)
    for r in radii:
        out /= r
    return out


def _support_about(state: SupportState, z: np.ndarray) -> np.ndarray:
    dirs, _ = _quadrature(state)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if state.kind == PLANAR and z.shape != (2,):
        raise PreconditionError("planar center must be a 2-vector")
    if state.kind != PLANAR:
        z = z[-1:] if z.size in (1, 3) else z  # accept scalar axis offset or 3-vector
        if z.shape != (1,):
            raise PreconditionError("axisymmetric center must be an axis offset")
    return state.u - dirs @ z


def entropy(state: SupportState, z, beta: float,
            allow_small_beta: bool = False) -> EntropyEvaluation:
    """E_beta(Omega, z): log-average of u_z (beta = 1) or its power-mean variant."""
    _check_beta(beta, state.dim, allow_small_beta)
    uz = _support_about(state, z)
    if np.any(uz <= 0):
        raise EntropyDomainError("center lies outside or on the boundary")
    _, w = _quadrature(state)
    omega = w.sum()
    if abs(beta - 1.0) < 1e-12:
        val = float((w * np.log(uz)).sum() / omega)
        branch = "log"
    else:
        q = 1.0 - 1.0 / beta
        val = float(beta / (beta - 1.0) * math.log((w * uz**q).sum() / omega))
        branch = "power"
    return EntropyEvaluation(beta=beta, value=val,
                             center=np.atleast_1d(np.asarray(z, dtype=float)),
                             branch=branch)


def _entropy_and_grad(state: SupportState, z: np.ndarray, beta: float):
    dirs, w = _quadrature(state)
    uz = state.u - dirs @ z
    if np.any(uz <= 0):
        return -np.inf, None, 0.0
    omega = w.sum()
    if abs(beta - 1.0) < 1e-12:
        val = (w * np.log(uz)).sum() / omega
        grad = -(w[:, None] * dirs / uz[:, None]).sum(axis=0) / omega
    else:
        q = 1.0 - 1.0 / beta
        I = (w * uz**q).sum() / omega
        val = beta / (beta - 1.0) * math.log(I)
        dI = q * (w[:, None] * uz[:, None] ** (q - 1.0) * (-dirs)).sum(axis=0) / omega
        grad = beta / (beta - 1.0) * dI / I
    return float(val), grad, float(uz.min())


def entropy_point(state: SupportState, beta: float, tol: float = 1e-10,
                  max_iter: int = 500, allow_small_beta: bool = False):
    """Maximizer of z -> E_beta(Omega, z) and the supremum value.

    Gradient ascent with backtracking line search; the objective is smooth and
    strictly concave on the interior, so the ascent converges to the unique
    entropy point.  Steps that would leave the body are backtracked away from
    the boundary (the objective diverges to -inf there).
    """
    _check_beta(beta, state.dim, allow_small_beta)
    z = sfl.steiner_point(state)
    z = z if state.kind == PLANAR else z[-1:]
    val, grad, _ = _entropy_and_grad(state, z, beta)
    if not np.isfinite(val):
        raise EntropyDomainError("Steiner point failed the interiority check")
    scale = float(np.max(np.abs(state.u)))
    for _ in range(max_iter):
        gnorm = np.linalg.norm(grad)
        if gnorm * scale < tol:
            break
        step = min(1.0, 0.5 * scale / gnorm)
        while step * gnorm > 1e-16 * scale:
            cand = z + step * grad
            new_val, new_grad, _ = _entropy_and_grad(state, cand, beta)
            if new_val > val + 1e-4 * step * gnorm**2:
                z, val, grad = cand, new_val, new_grad
                break
            step *= 0.5
        else:
            break
    else:
        raise EntropyDomainError("entropy-point ascent did not converge")
    return z.copy(), float(val)


def fbar(state: SupportState, beta: float, allow_small_beta: bool = False) -> float:
    """omega_n^{-1} integral of K^beta over the body, i.e. the K^(beta-1) average."""
    _check_beta(beta, state.dim, allow_small_beta)
    K = gauss_curvature(state)
    _, w = _quadrature(state)
    return float((w * K ** (beta - 1.0)).sum() / w.sum())


def renormalize_volume(state: SupportState, target: float) -> SupportState:
    vol = body_volume(state)
    if vol <= 0:
        raise PreconditionError("non-positive enclosed volume")
    s = (target / vol) ** (1.0 / (state.dim + 1.0))
    return SupportState(state.kind, state.u * s, state.t)


def gcf_rescaled_step(rstate: RescaledGCFState, beta: float, dtau: float,
                      allow_small_beta: bool = False) -> RescaledGCFState:
    """RK4 step of du/dtau = -K^beta / fbar + u, then exact volume renormalization."""
    _check_beta(beta, rstate.state.dim, allow_small_beta)

    _, w = _quadrature(rstate.state)
    omega = w.sum()

    def rhs(u):
        st = SupportState(rstate.state.kind, u, 0.0)
        K = gauss_curvature(st)
        normalizer = (w * K ** (beta - 1.0)).sum() / omega
        return -(K**beta) / normalizer + u

    u = rstate.state.u
    k1 = rhs(u)
    k2 = rhs(u + 0.5 * dtau * k1)
    k3 = rhs(u + 0.5 * dtau * k2)
    k4 = rhs(u + dtau * k3)
    unew = u + dtau / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if rstate.state.kind == PLANAR:
        unew = sfl.drop_nyquist(unew)
    st = SupportState(rstate.state.kind, unew, 0.0)
    sfl.curvature_radii(st)  # convexity validation
    st = renormalize_volume(st, rstate.target_volume)
    return RescaledGCFState(state=st, tau=rstate.tau + dtau)


def sigma_integral(state: SupportState, z) -> float:
    """Integral of the sigma-measure u_z / K d(theta); equals omega_n after
    volume normalization (an exact identity of the support parametrization)."""
    uz = _support_about(state, z)
    K = gauss_curvature(state)
    _, w = _quadrature(state)
    return float((w * uz / K).sum())


def entropy_monotonicity_defects(rstate: RescaledGCFState, beta: float,
                                 dtau: float = 1e-4,
                                 allow_small_beta: bool = False):
    """(dE_dtau_est, holder_rhs, variance_defect) at one rescaled snapshot.

    The slope is a forward finite difference of the entropy over one internal
    step; the bound is the Holder defect
    -[int f^(1+1/beta) dsigma * int dsigma / (int f^(1/beta) dsigma * int f dsigma) - 1]
    with f = K^beta / u_e about the entropy point e, dsigma = u_e / K d(theta);
    the variance is int (f - fbar)^2 dnu.  The slope must not exceed the bound
    (itself nonpositive) up to tolerance, and the sigma-integral must equal
    omega_n to 1e-8 relative.
    """
    state = rstate.state
    n = state.dim
    omega = _omega_n(n)
    e, E0 = entropy_point(state, beta, allow_small_beta=allow_small_beta)
    K = gauss_curvature(state)
    uz = _support_about(state, e)
    _, w = _quadrature(state)
    dsigma = w * uz / K
    total = dsigma.sum()
    if abs(total - omega) > 1e-8 * omega:
        raise PreconditionError(
            f"sigma-integral {total:.12g} deviates from omega_n {omega:.12g}")
    f = K**beta / uz
    holder = -((f ** (1.0 + 1.0 / beta) * dsigma).sum() * total
               / ((f ** (1.0 / beta) * dsigma).sum() * (f * dsigma).sum()) - 1.0)
    dnu = dsigma / omega
    f_mean = (f * dnu).sum()
    variance = float(((f - f_mean) ** 2 * dnu).sum())
    after = gcf_rescaled_step(rstate, beta, dtau, allow_small_beta)
    _, E1 = entropy_point(after.state, beta, allow_small_beta=allow_small_beta)
    slope = (E1 - E0) / dtau
    return float(slope), float(holder), variance


def eccentricity(state: SupportState) -> float:
    """Circumradius-to-inradius ratio minus one; zero exactly for balls."""
    rp = sfl.radii(state)
    return rp.rho_plus / rp.rho_minus - 1.0


@dataclass
class EntropySeriesRecord:
    tau: float
    entropy: float
    entropy_point: np.ndarray
    holder_defect: float
    variance_defect: float
    volume: float


def suggest_dtau(state: SupportState, beta: float, safety: float = 0.3) -> float:
    """Explicit-stability step for the rescaled flow (diffusion CFL in the angle)."""
    radii = sfl.curvature_radii(state)
    rmin = min(float(r.min()) for r in radii)
    dangle = 2.0 * np.pi / state.N if state.kind == PLANAR else np.pi / state.N
    nbeta = state.dim * beta
    return safety * dangle**2 * rmin ** (nbeta + 1.0) / max(nbeta, 0.3)


def run_rescaled_flow(initial: SupportState, beta: float, tau_end: float,
                      record_dtau: float = 0.1, safety: float = 0.3,
                      allow_small_beta: bool = False, max_steps: int = 5_000_000):
    """Evolve the volume-normalized rescaled flow; returns the records and state.

    The step size follows the explicit-stability limit; monitors are recorded
    about every record_dtau units of tau and at both endpoints.
    """
    _check_beta(beta, initial.dim, allow_small_beta)
    rstate = RescaledGCFState(state=renormalize_volume(initial, RescaledGCFState(
        state=initial, tau=0.0).target_volume), tau=0.0)
    records = []

    def record():
        slope, holder, var = entropy_monotonicity_defects(
            rstate, beta, allow_small_beta=allow_small_beta)
        e, E = entropy_point(rstate.state, beta, allow_small_beta=allow_small_beta)
        records.append(EntropySeriesRecord(
            tau=rstate.tau, entropy=E, entropy_point=e,
            holder_defect=holder, variance_defect=var,
            volume=body_volume(rstate.state)))

    record()
    next_record = record_dtau
    steps = 0
    while rstate.tau < tau_end - 1e-12 and steps < max_steps:
        dtau = min(suggest_dtau(rstate.state, beta, safety), tau_end - rstate.tau)
        while True:
            try:
                rstate = gcf_rescaled_step(rstate, beta, dtau, allow_small_beta)
                break
            except sfl.ConvexityError:
                dtau *= 0.5
                if dtau < 1e-12:
                    raise
        steps += 1
        if rstate.tau >= next_record - 1e-12 or rstate.tau >= tau_end - 1e-12:
            record()
            next_record = rstate.tau + record_dtau
    return records, rstate
