"""Phase functions and the single-scattering energy integral.

The integral runs over plane tilt ``vartheta``, in-plane angle ``varpi`` and distance
``tau`` from the transmitter.  Tensor Gauss-Legendre rules are laid on mapped
coordinates: a sine map on the two angular ranges (whose integrands vanish like a
square root at the support edges) and a sinh map on ``tau`` centred on the point
of closest approach to the receiver, where the 1/eps^2 factor peaks.  Each ray is
split where the blockage weight switches, so every panel has a smooth integrand.
"""
from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ZeroScattering
from .geometry.blockage import paper_rule, receiver_shadow, transmitter_entry
from .geometry.frames import rx_plane_frame, rx_tilt_of, rx_condition_of, tx_case_of, tx_plane_frame
from .geometry.scene import (
    ObstacleBox,
    ScatterSample,
    SystemGeometry,
    direction_coefficients,
    tau_bounds,
    varpi_bounds,
)

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class Atmosphere:
    """Scattering and absorption coefficients (1/m) and phase-function shape."""

    ks_ray: float
    ks_mie: float
    ka: float
    gamma: float = 0.017
    g: float = 0.72
    f: float = 0.5

    def __post_init__(self):
        problems = []
        for name in ("ks_ray", "ks_mie", "ka", "gamma"):
            if not getattr(self, name) >= 0.0:
                problems.append(f"{name} must be >= 0")
        if not -1.0 < self.g < 1.0:
            problems.append("g must lie in (-1, 1)")
        if not 0.0 <= self.f <= 1.0:
            problems.append("f must lie in [0, 1]")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def ks(self) -> float:
        return self.ks_ray + self.ks_mie

    @property
    def ke(self) -> float:
        return self.ks + self.ka


@dataclass(frozen=True)
class QuadratureSpec:
    n_vartheta: int = 64
    n_varpi: int = 64
    n_tau: int = 128
    tau_truncation: float = 30.0
    epsilon_floor: float = 1e-6
    n_facade_y: int = 64
    n_facade_z: int = 64

    def __post_init__(self):
        if min(self.n_vartheta, self.n_varpi, self.n_tau, self.n_facade_y, self.n_facade_z) < 2:
            raise DomainError("node counts must be >= 2")
        if not self.tau_truncation > 0:
            raise DomainError("tau_truncation must be > 0")
        if not self.epsilon_floor > 0:
            raise DomainError("epsilon_floor must be > 0")

    def scaled(self, factor: float) -> "QuadratureSpec":
        """Copy with every node count multiplied by ``factor``."""
        n = lambda k: max(2, int(round(k * factor)))  # noqa: E731
        return dataclasses.replace(self, n_vartheta=n(self.n_vartheta), n_varpi=n(self.n_varpi),
                                   n_tau=n(self.n_tau), n_facade_y=n(self.n_facade_y),
                                   n_facade_z=n(self.n_facade_z))


# --- phase functions -----------------------------------------------------------------

def _check_mu(mu):
    mu = np.asarray(mu, dtype=float)
    if np.any(np.abs(mu) > 1.0 + 1e-12):
        raise DomainError("mu must lie in [-1, 1]")
    return np.clip(mu, -1.0, 1.0)


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def phase_rayleigh(mu, gamma):
    mu = _check_mu(mu)
    return _out(3.0 * (1.0 + 3.0 * gamma + (1.0 - gamma) * mu**2) / (16.0 * math.pi * (1.0 + 2.0 * gamma)))


def phase_mie(mu, g, f):
    """Generalised Henyey-Greenstein density with hemispheric correction weight ``f``."""
    mu = _check_mu(mu)
    if not abs(g) < 1.0:
        raise DomainError("|g| must be < 1")
    hg = (1.0 + g * g - 2.0 * g * mu) ** -1.5
    corr = f * (3.0 * mu**2 - 1.0) / (2.0 * (1.0 + g * g) ** 1.5)
    return _out((1.0 - g * g) / FOUR_PI * (hg + corr))


def phase(mu, atm: Atmosphere):
    ks = atm.ks
    if ks <= 0.0:
        raise ZeroScattering("total scattering coefficient is zero")
    return _out(atm.ks_ray / ks * np.asarray(phase_rayleigh(mu, atm.gamma))
                + atm.ks_mie / ks * np.asarray(phase_mie(mu, atm.g, atm.f)))


# --- kernel ------------------------------------------------------------------------------

def beam_solid_angle(beta_t: float) -> float:
    return 2.0 * math.pi * (1.0 - math.cos(beta_t))


def kernel_values(tau, varpi, eps, cos_s, cos_v, geom: SystemGeometry, atm: Atmosphere):
    """Integrand per unit (tau, varpi, vartheta), with the tau^2 volume factor cancelled."""
    return (geom.pulse_energy * cos_v * phase(cos_s, atm) * np.exp(-atm.ke * (tau + eps))
            * geom.aperture_area * atm.ks * np.cos(varpi) / (beam_solid_angle(geom.beta_t) * eps**2))


def kernel(sample: ScatterSample, geom: SystemGeometry, atm: Atmosphere,
           epsilon_floor: float = QuadratureSpec.epsilon_floor) -> float:
    """Scattering integrand at one sample, excluding the blockage weight.

    Returns 0 when the sample sits closer to the receiver than ``epsilon_floor``.
    """
    if sample.epsilon < epsilon_floor:
        return 0.0
    return float(kernel_values(sample.tau, sample.varpi, sample.epsilon, math.cos(sample.theta_s),
                               math.cos(sample.theta_v), geom, atm))


# --- support of the overlap in (vartheta, varpi) -------------------------------------------

def _nonempty(vartheta, varpi, geom):
    _, _, kind, *_ = tau_bounds(direction_coefficients(varpi, vartheta, geom), geom)
    return kind > 0


def _bisect_edge(pred, inside, outside, iters=50):
    """Shrink [inside, outside] onto the boundary of a predicate (vectorised)."""
    inside = np.array(inside, dtype=float)
    outside = np.array(outside, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (inside + outside)
        ok = pred(mid)
        inside = np.where(ok, mid, inside)
        outside = np.where(ok, outside, mid)
    return inside


def _interval_support(pred_grid, pred, lo, hi, n_grid):
    """Support [a, b] of a predicate that is true on one sub-interval of (lo, hi)."""
    grid = np.linspace(lo, hi, n_grid)
    ok = pred_grid(grid)
    if not ok.any():
        return None
    idx = np.flatnonzero(ok)
    i0, i1 = idx[0], idx[-1]
    a = grid[i0] if i0 == 0 else float(_bisect_edge(pred, grid[i0], grid[i0 - 1]))
    b = grid[i1] if i1 == n_grid - 1 else float(_bisect_edge(pred, grid[i1], grid[i1 + 1]))
    return a, b


def varpi_support(vartheta: float, geom: SystemGeometry, n_grid: int = 257):
    lo, hi = varpi_bounds(vartheta, geom.beta_t)
    pred = lambda w: _nonempty(vartheta, w, geom)  # noqa: E731
    return _interval_support(pred, pred, lo, hi, n_grid)


def vartheta_support(geom: SystemGeometry, n_grid: int = 257):
    b = geom.beta_t * (1.0 - 1e-12)

    def any_varpi(theta):
        theta = np.atleast_1d(theta)
        lo, hi = varpi_bounds(theta, geom.beta_t)
        w = np.linspace(0.0, 1.0, 129)[None, :] * (hi - lo)[:, None] + lo[:, None]
        return _nonempty(theta[:, None], w, geom).any(axis=1)

    return _interval_support(any_varpi, lambda t: any_varpi(t).reshape(np.shape(t)), -b, b, n_grid)


def _sine_rule(a, b, n):
    """Gauss-Legendre nodes for x = m + h sin(s), s in [-pi/2, pi/2], with weights dx."""
    s, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * math.pi * s
    w = 0.5 * math.pi * w
    m, h = 0.5 * (a + b), 0.5 * (b - a)
    return m + h * np.sin(s), w * h * np.cos(s)


def _graded_rule(a, b, n, split=None):
    """Like :func:`_sine_rule`, but with a strongly graded split at ``split``.

    Each side uses x = end + L*phi(s) with phi(s) = 1 - (1-s)^4 (1+4s): quadratic
    clustering at the support edge and quartic clustering at the split, which
    resolves the log/peak behaviour left by a point singularity of the integrand.
    """
    if split is None or not a < split < b:
        return _sine_rule(a, b, n)
    s, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    phi = 1.0 - (1.0 - s) ** 4 * (1.0 + 4.0 * s)
    dphi = 20.0 * s * (1.0 - s) ** 3 * w
    left = a + (split - a) * phi
    right = b - (b - split) * phi
    return np.concatenate([left, right[::-1]]), np.concatenate([(split - a) * dphi, ((b - split) * dphi)[::-1]])


def receiver_singularity(geom: SystemGeometry):
    """Plane tilt of the receiver direction when R lies inside the beam, else None."""
    u = geom.receiver / geom.range_r
    if math.acos(min(1.0, float(u @ geom.beam_axis))) >= geom.beta_t:
        return None
    return math.atan2(u[2], u[0] * math.cos(geom.alpha_t) + u[1] * math.sin(geom.alpha_t)) - geom.theta_t


def _nearest_varpi(vartheta: float, geom: SystemGeometry) -> float:
    """In-plane angle of the direction in plane ``vartheta`` closest to R."""
    delta = geom.theta_t + vartheta
    a = geom.alpha_t
    f = np.array([math.cos(delta) * math.cos(a), math.cos(delta) * math.sin(a), math.sin(delta)])
    g = np.array([-math.sin(a), math.cos(a), 0.0])
    u = geom.receiver
    return math.atan2(float(u @ g), float(u @ f))


# --- blockage breakpoints along rays -------------------------------------------------------

@dataclass
class _RaySet:
    """One row of rays sharing a vartheta node."""

    vartheta: float
    varpi: np.ndarray
    directions: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def _oracle_breaks(rays: _RaySet, geom, obstacle):
    if obstacle is None:
        return np.empty(rays.lo.shape + (0,))
    entry = transmitter_entry(rays.directions, obstacle)
    s_lo, s_hi = receiver_shadow(rays.directions, geom, obstacle)
    return np.stack([entry, s_lo, s_hi], axis=-1)


def _paper_weights(tau, rays: _RaySet, geom, obstacle, tx, case):
    """Rule-set weight at distances ``tau`` (shape (M, K)) along each ray."""
    p = tau[..., None] * rays.directions[:, None, :]
    rx = rx_plane_frame(np.clip(rx_tilt_of(p, geom), -geom.beta_r * (1 - 1e-15), geom.beta_r * (1 - 1e-15)),
                        geom, obstacle, exact_omega=tx.exact)
    cond = rx_condition_of(rx)
    t = tx.frame.angle_of(p)
    rho = rx.angle_of(p)
    rp = np.linalg.norm(p - geom.receiver, axis=-1)
    return paper_rule(case, cond, t, rho, tau, rp, tx.frame, rx)


@dataclass
class _TxContext:
    frame: object
    exact: bool


def _paper_breaks(rays: _RaySet, geom, obstacle, hi, exact_omega, n_probe=96, tol=1e-9):
    """Distances where the rule-set weight flips along each ray, found by bisection."""
    frame = tx_plane_frame(rays.vartheta, geom, obstacle, exact_omega)
    case = int(tx_case_of(frame))
    tx = _TxContext(frame, exact_omega)
    base = _oracle_breaks(rays, geom, obstacle)
    lo = rays.lo
    frac = np.linspace(0.0, 1.0, n_probe)[None, :]
    probe = np.concatenate([lo[:, None] + frac * (hi - lo)[:, None],
                            np.clip(np.nan_to_num(base, nan=lo[0], posinf=lo[0]), lo[:, None], hi[:, None])],
                           axis=1)
    probe.sort(axis=1)
    probe = np.clip(probe, lo[:, None] * (1 + 1e-12) + 1e-12, None)
    w = _paper_weights(probe, rays, geom, obstacle, tx, case)
    flips = w[:, 1:] != w[:, :-1]
    rows, cols = np.nonzero(flips)
    if rows.size == 0:
        return np.empty(lo.shape + (0,))
    a = probe[rows, cols].copy()
    b = probe[rows, cols + 1].copy()
    wa = w[rows, cols]
    sub = _RaySet(rays.vartheta, rays.varpi[rows], rays.directions[rows], lo[rows], hi[rows])
    while np.max(b - a) > tol:
        mid = 0.5 * (a + b)
        wm = _paper_weights(mid[:, None], sub, geom, obstacle, tx, case)[:, 0]
        same = wm == wa
        a = np.where(same, mid, a)
        b = np.where(same, b, mid)
    counts = np.bincount(rows, minlength=lo.size)
    out = np.full((lo.size, max(int(counts.max()), 1)), np.nan)
    slot = np.zeros(lo.size, dtype=int)
    for r, x in zip(rows, 0.5 * (a + b)):
        out[r, slot[r]] = x
        slot[r] += 1
    return out


# --- cubature ----------------------------------------------------------------------------------

@dataclass
class ScatterResult:
    q_sca: float
    diagnostics: dict = field(default_factory=dict)


def _row_integral(vt, wt, geom, atm, obstacle, quad, blockage, exact_omega, gl_tau):
    """Contribution of one vartheta node: returns (q, q_unblocked, n_floor)."""
    sup = varpi_support(vt, geom)
    if sup is None:
        return 0.0, 0.0, 0
    split = _nearest_varpi(vt, geom) if receiver_singularity(geom) is not None else None
    varpi, w_varpi = _graded_rule(sup[0], sup[1], quad.n_varpi, split)
    dirs = direction_coefficients(varpi, vt, geom)
    lo, hi, kind, *_ = tau_bounds(dirs, geom)
    keep = kind > 0
    if not keep.any():
        return 0.0, 0.0, 0
    varpi, w_varpi, dirs, lo, hi = varpi[keep], w_varpi[keep], dirs[keep], lo[keep], hi[keep]
    hi = np.where(np.isfinite(hi), hi, lo + quad.tau_truncation / atm.ke)
    rays = _RaySet(vt, varpi, dirs, lo, hi)
    if obstacle is None:
        breaks = np.empty(lo.shape + (0,))
    elif blockage == "oracle":
        breaks = _oracle_breaks(rays, geom, obstacle)
    else:
        breaks = np.concatenate([_oracle_breaks(rays, geom, obstacle),
                                 _paper_breaks(rays, geom, obstacle, hi, exact_omega)], axis=1)
    edges = np.concatenate([lo[:, None], np.clip(np.nan_to_num(breaks, nan=lo[0] - 1.0),
                                                  lo[:, None], hi[:, None]), hi[:, None]], axis=1)
    edges.sort(axis=1)
    a, b = edges[:, :-1], edges[:, 1:]  # (M, P) panels
    # sinh map centred on the closest approach to R
    rr = geom.receiver
    tc = np.clip(dirs @ rr, 0.0, None)[:, None]
    dc = np.maximum(np.linalg.norm(rr - (dirs @ rr)[:, None] * dirs, axis=1), 1e-6 * geom.range_r)[:, None]
    va, vb = np.arcsinh((a - tc) / dc), np.arcsinh((b - tc) / dc)
    x, wx = gl_tau
    v = 0.5 * (va + vb)[..., None] + 0.5 * (vb - va)[..., None] * x
    tau = tc[..., None] + dc[..., None] * np.sinh(v)
    w_tau = 0.5 * (vb - va)[..., None] * wx * dc[..., None] * np.cosh(v)
    p = tau[..., None] * dirs[:, None, None, :]
    d = rr - p
    eps = np.linalg.norm(d, axis=-1)
    small = eps < quad.epsilon_floor
    eps_safe = np.where(small, 1.0, eps)
    cos_s = np.clip(np.einsum("mk,mpnk->mpn", dirs, d) / eps_safe, -1.0, 1.0)
    cos_v = np.clip(-(d @ geom.fov_axis) / eps_safe, -1.0, 1.0)
    val = kernel_values(tau, varpi[:, None, None], eps_safe, cos_s, cos_v, geom, atm)
    val = np.where(small | (b - a <= 0)[..., None], 0.0, val)
    panel = np.sum(val * w_tau, axis=-1)  # (M, P)
    if obstacle is None:
        weight = np.ones_like(panel)
    else:
        mid = 0.5 * (a + b)
        mid_pts = mid[..., None] * dirs[:, None, :]
        if blockage == "oracle":
            from .geometry.blockage import g_wei_oracle
            weight = g_wei_oracle(mid_pts, geom, obstacle).astype(float)
        else:
            frame = tx_plane_frame(vt, geom, obstacle, exact_omega)
            weight = _paper_weights(mid, rays, geom, obstacle, _TxContext(frame, exact_omega),
                                    int(tx_case_of(frame))).astype(float)
    row_full = np.sum(panel, axis=1) @ w_varpi
    row = np.sum(panel * weight, axis=1) @ w_varpi
    return wt * row, wt * row_full, int(small.sum())


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("UVNLOS_THREADS", "1")))
    except ValueError:
        return 1


def scattered_energy(geom: SystemGeometry, atm: Atmosphere, obstacle: ObstacleBox | None,
                     quad: QuadratureSpec = QuadratureSpec(), blockage: str = "oracle",
                     exact_omega: bool = True) -> ScatterResult:
    """Received single-scattered energy (J).

    ``blockage`` chooses the weighting-factor evaluator: "oracle" (exact ray/box
    test) or "paper" (case/condition rule set, with ``exact_omega`` selecting how
    beam edges are measured inside tilted planes).  Pass ``obstacle=None`` for an
    unobstructed channel.
    """
    if blockage not in ("oracle", "paper"):
        raise ValueError("blockage must be 'oracle' or 'paper'")
    if atm.ks <= 0.0:
        raise ZeroScattering("total scattering coefficient is zero")
    diag = {"nodes": [quad.n_vartheta, quad.n_varpi, quad.n_tau],
            "truncation_bound_j": geom.pulse_energy * math.exp(-quad.tau_truncation),
            "blockage": blockage if obstacle is not None else "none"}
    sup = vartheta_support(geom)
    if sup is None:
        diag.update(empty_overlap=True, blocked_fraction=0.0, epsilon_underflow=0)
        return ScatterResult(0.0, diag)
    thetas, w_thetas = _graded_rule(sup[0], sup[1], quad.n_vartheta, receiver_singularity(geom))
    gl_tau = np.polynomial.legendre.leggauss(quad.n_tau)

    def job(i):
        return _row_integral(float(thetas[i]), float(w_thetas[i]), geom, atm, obstacle, quad,
                             blockage, exact_omega, gl_tau)

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(thetas.size)))
    else:
        parts = [job(i) for i in range(thetas.size)]
    q = math.fsum(p[0] for p in parts)
    q_full = math.fsum(p[1] for p in parts)
    diag.update(empty_overlap=q_full == 0.0,
                blocked_fraction=(1.0 - q / q_full) if q_full > 0 else 0.0,
                epsilon_underflow=sum(p[2] for p in parts),
                unblocked_q_j=q_full)
    return ScatterResult(max(q, 0.0), diag)
