"""Reflected energy from the obstacle facade that faces the terminals.

The facade is the plane x = x_c, spanning y in [y_c, y_d] and z in [0, kappa], with
outward normal +x.  Only the patch lit by the beam and seen by the receiver
contributes.  Both terminals sit on the +x side of that plane, and the cuboid is
convex, so the cuboid cannot shadow either leg of a facade bounce; no occlusion
test is applied.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .geometry.scene import ObstacleBox, SystemGeometry, convex_quadratic_interval
from .scattering import Atmosphere, QuadratureSpec, _graded_rule, _interval_support, beam_solid_angle

NORMAL = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class ReflectionSurface:
    """Phong parameters of the facade, optionally bound to an obstacle's geometry."""

    r_r: float = 0.1
    m_s: float = 5.0
    eta: float = 0.5
    plane_x: float | None = None
    y_span: tuple | None = None
    z_span: tuple | None = None

    def __post_init__(self):
        problems = []
        if not 0.0 <= self.r_r <= 1.0:
            problems.append("r_r must lie in [0, 1]")
        if not 0.0 <= self.eta <= 1.0:
            problems.append("eta must lie in [0, 1]")
        if not self.m_s >= 0.0:
            problems.append("m_s must be >= 0")
        if self.y_span is not None and not self.y_span[0] < self.y_span[1]:
            problems.append("y_span must be increasing")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def normal(self) -> np.ndarray:
        return NORMAL.copy()

    def bind(self, obstacle: ObstacleBox) -> "ReflectionSurface":
        """Copy with the facade geometry of ``obstacle`` filled in."""
        return dataclasses.replace(self, plane_x=obstacle.x_c, y_span=(obstacle.y_b, obstacle.y_a),
                                   z_span=(0.0, obstacle.height))


def phong_intensity(theta_1, theta_2, eta, m_s):
    """Diffuse plus specular-lobe pattern (1/sr); the lobe is cut off behind the surface."""
    theta_1 = np.asarray(theta_1, dtype=float)
    theta_2 = np.asarray(theta_2, dtype=float)
    if np.any((theta_1 < 0) | (theta_1 > 0.5 * math.pi + 1e-12)):
        raise DomainError("theta_1 must lie in [0, pi/2]")
    if np.any((theta_2 < 0) | (theta_2 > math.pi + 1e-12)):
        raise DomainError("theta_2 must lie in [0, pi]")
    c2 = np.clip(np.cos(theta_2), 0.0, None)
    out = eta * np.cos(theta_1) / math.pi + (1.0 - eta) * (m_s + 1.0) / (2.0 * math.pi) * c2**m_s
    return float(out) if out.ndim == 0 else out


def _phong_cos(cos_1, cos_2, eta, m_s):
    c2 = np.clip(cos_2, 0.0, None)
    return eta * cos_1 / math.pi + (1.0 - eta) * (m_s + 1.0) / (2.0 * math.pi) * c2**m_s


def specular_direction(tau_hat, normal=NORMAL):
    tau_hat = np.asarray(tau_hat, dtype=float)
    return tau_hat - 2.0 * np.sum(tau_hat * normal, axis=-1, keepdims=True) * normal


def in_reflection_region(point, geom: SystemGeometry, obstacle: ObstacleBox):
    """True where a facade point is inside the facade, the beam and the FoV."""
    p = np.asarray(point, dtype=float)
    y, z = p[..., 1], p[..., 2]
    tau = np.linalg.norm(p, axis=-1)
    d = p - geom.receiver
    eps = np.linalg.norm(d, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_t = (p @ geom.beam_axis) / tau
        cos_r = (d @ geom.fov_axis) / eps
    out = ((y >= obstacle.y_b) & (y <= obstacle.y_a) & (z >= 0.0) & (z <= obstacle.height)
           & (cos_t >= math.cos(geom.beta_t)) & (cos_r >= math.cos(geom.beta_r)))
    return bool(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ReflectionPatchSample:
    point: np.ndarray
    tau_vec: np.ndarray
    tau: float
    eps_vec: np.ndarray
    epsilon: float
    omega_i: float
    v_s: np.ndarray
    theta_1: float
    theta_2: float
    theta_v: float


def reflection_patch(point, geom: SystemGeometry) -> ReflectionPatchSample:
    p = np.asarray(point, dtype=float)
    tau_vec = p - geom.transmitter
    tau = float(np.linalg.norm(tau_vec))
    eps_vec = geom.receiver - p
    eps = float(np.linalg.norm(eps_vec))
    t_hat = tau_vec / tau
    e_hat = eps_vec / eps
    v_s = specular_direction(t_hat)
    ang = lambda a, b: float(math.acos(max(-1.0, min(1.0, float(a @ b)))))  # noqa: E731
    return ReflectionPatchSample(
        point=p, tau_vec=tau_vec, tau=tau, eps_vec=eps_vec, epsilon=eps,
        omega_i=ang(-t_hat, NORMAL), v_s=v_s, theta_1=ang(e_hat, NORMAL), theta_2=ang(e_hat, v_s),
        theta_v=ang(-e_hat, geom.fov_axis),
    )


def _integrand(p, geom, atm, surface):
    tau = np.linalg.norm(p, axis=-1)
    d = geom.receiver - p
    eps = np.linalg.norm(d, axis=-1)
    t_hat = p / tau[..., None]
    e_hat = d / eps[..., None]
    cos_i = -t_hat[..., 0]
    cos_1 = e_hat[..., 0]
    cos_2 = np.sum(e_hat * specular_direction(t_hat), axis=-1)
    cos_v = -(e_hat @ geom.fov_axis)
    pattern = _phong_cos(cos_1, cos_2, surface.eta, surface.m_s)
    return (surface.r_r * geom.pulse_energy * geom.aperture_area * pattern * cos_v * cos_i
            * np.exp(-atm.ke * (tau + eps)) / (beam_solid_angle(geom.beta_t) * tau**2 * eps**2))


def reflection_integrand(patch: ReflectionPatchSample, geom: SystemGeometry, atm: Atmosphere,
                         surface: ReflectionSurface) -> float:
    """Received energy per unit facade area (J/m^2) from the patch at ``patch.point``."""
    return float(_integrand(patch.point, geom, atm, surface))


def _cone_y_interval(z, x_c, apex, axis, cos_half):
    """y-range of the facade line (x_c, y, z) inside one nappe of a cone (vectorised in z)."""
    z = np.asarray(z, dtype=float)
    c2 = cos_half**2
    ox, oz = x_c - apex[0], z - apex[2]
    oy = -apex[1]
    # X(y) - apex = (ox, y + oy, oz)
    a = np.full(z.shape, c2 - axis[1] ** 2)
    lin = axis[0] * ox + axis[1] * oy + axis[2] * oz
    b = 2.0 * (c2 * oy - axis[1] * lin)
    c = c2 * (ox**2 + oy**2 + oz**2) - lin**2
    scale = max(abs(x_c), abs(apex[1]), 1.0)
    return convex_quadratic_interval(a, b, c, lin, np.full(z.shape, axis[1]), -np.inf, scale)


def region_y_interval(z, geom: SystemGeometry, obstacle: ObstacleBox):
    """(y_lo, y_hi, nonempty) of the effective region at height ``z``."""
    z = np.asarray(z, dtype=float)
    x_c = obstacle.x_c
    t_lo, t_hi, t_ok = _cone_y_interval(z, x_c, geom.transmitter, geom.beam_axis, math.cos(geom.beta_t))
    r_lo, r_hi, r_ok = _cone_y_interval(z, x_c, geom.receiver, geom.fov_axis, math.cos(geom.beta_r))
    lo = np.fmax(np.fmax(t_lo, r_lo), obstacle.y_b)
    hi = np.fmin(np.fmin(t_hi, r_hi), obstacle.y_a)
    ok = t_ok & r_ok & (hi > lo) & (z >= 0.0) & (z <= obstacle.height)
    return lo, hi, ok


@dataclass
class ReflectResult:
    q_ref: float
    diagnostics: dict = field(default_factory=dict)


def reflected_energy(geom: SystemGeometry, atm: Atmosphere, obstacle: ObstacleBox | None,
                     surface: ReflectionSurface, quad: QuadratureSpec = QuadratureSpec()) -> ReflectResult:
    """Received facade-reflected energy (J) by Gauss-Legendre cubature over the lit region."""
    if obstacle is None or surface.r_r == 0.0:
        return ReflectResult(0.0, {"active_region_fraction": 0.0, "empty_region": True})
    n_z, n_y = quad.n_facade_z, quad.n_facade_y

    def has_region(z):
        return region_y_interval(np.atleast_1d(z), geom, obstacle)[2].reshape(np.shape(z))

    sup = _interval_support(has_region, has_region, 0.0, obstacle.height, 513)
    if sup is None:
        return ReflectResult(0.0, {"active_region_fraction": 0.0, "empty_region": True})
    zs, wz = _graded_rule(sup[0], sup[1], n_z)
    y_lo, y_hi, ok = region_y_interval(zs, geom, obstacle)
    y_lo = np.where(ok, y_lo, 0.0)
    y_hi = np.where(ok, y_hi, 0.0)
    s, w = np.polynomial.legendre.leggauss(n_y)
    s = 0.5 * math.pi * s
    w = 0.5 * math.pi * w
    m, h = 0.5 * (y_lo + y_hi)[:, None], 0.5 * (y_hi - y_lo)[:, None]
    ys = m + h * np.sin(s)
    wy = h * w * np.cos(s)
    pts = np.stack(np.broadcast_arrays(obstacle.x_c, ys, zs[:, None]), axis=-1)
    vals = _integrand(pts, geom, atm, surface)
    q = float(np.sum(vals * wy, axis=1) @ wz)
    area = float(np.sum(wy, axis=1) @ wz)
    facade_area = obstacle.width * obstacle.height
    return ReflectResult(max(q, 0.0), {"active_region_fraction": area / facade_area,
                                       "empty_region": area == 0.0,
                                       "nodes": [n_z, n_y]})
