"""Transceiver layout, obstacle cuboid, cones and the scatter-point parametrisation.

Coordinates: transmitter T at the origin, receiver R at (0, r, 0), Z up.
Azimuths are measured anticlockwise from +X, elevations up from the XY plane.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateAzimuth, DomainError

HALF_PI = 0.5 * math.pi


def unit_vector(elevation, azimuth):
    """Unit vector(s) with the given elevation and azimuth (radians)."""
    elevation = np.asarray(elevation, dtype=float)
    azimuth = np.asarray(azimuth, dtype=float)
    ce = np.cos(elevation)
    return np.stack(
        np.broadcast_arrays(ce * np.cos(azimuth), ce * np.sin(azimuth), np.sin(elevation)),
        axis=-1,
    )


@dataclass(frozen=True)
class SystemGeometry:
    """Beam/FoV shape and placement of the two terminals (SI units, radians)."""

    beta_t: float
    beta_r: float
    theta_t: float
    theta_r: float
    alpha_t: float
    alpha_r: float
    range_r: float
    aperture_area: float = 1.92e-4
    pulse_energy: float = 1.0

    def __post_init__(self):
        problems = []
        for name in ("beta_t", "beta_r", "theta_t", "theta_r"):
            value = getattr(self, name)
            if not 0.0 < value < HALF_PI:
                problems.append(f"{name}={value!r} outside (0, pi/2)")
        if not HALF_PI <= self.alpha_t < math.pi:
            problems.append(f"alpha_t={self.alpha_t!r} outside [pi/2, pi)")
        if not -math.pi < self.alpha_r <= -HALF_PI:
            problems.append(f"alpha_r={self.alpha_r!r} outside (-pi, -pi/2]")
        for name in ("range_r", "aperture_area", "pulse_energy"):
            if not getattr(self, name) > 0.0:
                problems.append(f"{name} must be > 0")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def transmitter(self) -> np.ndarray:
        return np.zeros(3)

    @property
    def receiver(self) -> np.ndarray:
        return np.array([0.0, self.range_r, 0.0])

    @property
    def beam_axis(self) -> np.ndarray:
        return unit_vector(self.theta_t, self.alpha_t)

    @property
    def fov_axis(self) -> np.ndarray:
        return unit_vector(self.theta_r, self.alpha_r)

    def replace(self, **changes) -> "SystemGeometry":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ObstacleBox:
    """Axis-aligned cuboid standing on the XY plane, entirely in x < 0.

    ``thickness`` runs along X, ``width`` along Y, ``height`` up from z = 0.
    """

    thickness: float
    width: float
    height: float
    center_x: float
    center_y: float

    def __post_init__(self):
        problems = [
            f"{name} must be > 0"
            for name in ("thickness", "width", "height")
            if not getattr(self, name) > 0.0
        ]
        if not self.center_x < -0.5 * self.thickness:
            problems.append("center_x must be < -thickness/2")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def lo(self) -> np.ndarray:
        return np.array([self.x_a, self.y_b, 0.0])

    @property
    def hi(self) -> np.ndarray:
        return np.array([self.x_c, self.y_a, self.height])

    @property
    def x_a(self) -> float:
        return self.center_x - 0.5 * self.thickness

    @property
    def x_c(self) -> float:
        return self.center_x + 0.5 * self.thickness

    @property
    def y_a(self) -> float:
        return self.center_y + 0.5 * self.width

    @property
    def y_b(self) -> float:
        return self.center_y - 0.5 * self.width

    @property
    def facade_x(self) -> float:
        return self.x_c

    def edge_xy(self, m: str) -> tuple[float, float]:
        """(x, y) of vertical edge ``m`` in {'a', 'b', 'c', 'd'}."""
        return {
            "a": (self.x_a, self.y_a),
            "b": (self.x_a, self.y_b),
            "c": (self.x_c, self.y_b),
            "d": (self.x_c, self.y_a),
        }[m]

    def replace(self, **changes) -> "ObstacleBox":
        return dataclasses.replace(self, **changes)


def range_scaled_obstacle(range_r: float) -> ObstacleBox:
    """Obstacle that scales with the link range: s = r/10, w = 2r, kappa = 2r, x_o = -3s/2, y_o = r/2."""
    s = range_r / 10.0
    return ObstacleBox(thickness=s, width=2 * range_r, height=2 * range_r,
                       center_x=-1.5 * s, center_y=range_r / 2.0)


def obstacle_corners(obstacle: ObstacleBox) -> dict[str, np.ndarray]:
    """Top corners A-D at z = kappa and their ground projections A'-D'."""
    out = {}
    for m in "abcd":
        x, y = obstacle.edge_xy(m)
        out[m.upper()] = np.array([x, y, obstacle.height])
        out[m.upper() + "'"] = np.array([x, y, 0.0])
    return out


def _cot(alpha: float) -> float:
    s = math.sin(alpha)
    if abs(s) < 1e-12:
        raise DegenerateAzimuth(f"cot undefined at alpha={alpha!r}")
    return math.cos(alpha) / s


@dataclass(frozen=True)
class CornerAngles:
    tx: dict
    rx: dict

    @property
    def tx_min(self) -> float:
        return min(self.tx.values())

    @property
    def rx_min(self) -> float:
        return min(self.rx.values())


def corner_angle_limits(geom: SystemGeometry, obstacle: ObstacleBox) -> CornerAngles:
    """Tilt angles of the planes through TG (resp. RQ) and each top corner."""
    cot_t = _cot(geom.alpha_t)
    cot_r = _cot(geom.alpha_r)
    kappa = obstacle.height
    tx, rx = {}, {}
    for m in "abcd":
        x, y = obstacle.edge_xy(m)
        tx[m] = math.atan2(kappa * math.sqrt(cot_t**2 + 1.0), abs(x * cot_t + y))
        rx[m] = math.atan2(kappa * math.sqrt(cot_r**2 + 1.0), abs(x * cot_r + y - geom.range_r))
    return CornerAngles(tx, rx)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class ValidityReport:
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


def validate_geometry(geom: SystemGeometry, obstacle: ObstacleBox | None) -> ValidityReport:
    """Check the constraints under which the rotating-plane blockage analysis holds.

    Never raises for a constructed scene; every violated inequality is listed.
    """
    found = []
    if not geom.theta_t - geom.beta_t > 0.0:
        found.append(Violation("delta_t_positive",
                               "theta_t - beta_t <= 0: transmitter plane elevation reaches zero"))
    if not geom.theta_r - geom.beta_r > 0.0:
        found.append(Violation("delta_r_positive",
                               "theta_r - beta_r <= 0: receiver plane elevation reaches zero"))
    if obstacle is None:
        return ValidityReport(tuple(found))
    try:
        limits = corner_angle_limits(geom, obstacle)
    except DegenerateAzimuth as exc:
        found.append(Violation("degenerate_azimuth", str(exc)))
        return ValidityReport(tuple(found))
    if geom.theta_t + geom.beta_t > limits.tx_min:
        found.append(Violation(
            "corner_limit_tx",
            f"theta_t + beta_t = {geom.theta_t + geom.beta_t:.6g} > min corner angle {limits.tx_min:.6g}"))
    if geom.theta_r + geom.beta_r > limits.rx_min:
        found.append(Violation(
            "corner_limit_rx",
            f"theta_r + beta_r = {geom.theta_r + geom.beta_r:.6g} > min corner angle {limits.rx_min:.6g}"))
    half_w = 0.5 * obstacle.width
    if not half_w < obstacle.center_y < geom.range_r - half_w:
        found.append(Violation("obstacle_y_range",
                               "center_y outside (w/2, r - w/2): obstacle overlaps a terminal's Y span"))
    return ValidityReport(tuple(found))


# --- scatter-point parametrisation -------------------------------------------------

def varpi_bounds(vartheta, beta_t):
    """In-plane half-width of the beam for plane tilt ``vartheta``: (-w, w)."""
    vartheta = np.asarray(vartheta, dtype=float)
    if np.any(np.abs(vartheta) > beta_t * (1 + 1e-12)):
        raise DomainError("|vartheta| exceeds beta_t")
    radicand = np.clip(math.tan(beta_t) ** 2 - np.tan(vartheta) ** 2, 0.0, None)
    w = np.arctan(np.sqrt(radicand) * np.cos(vartheta))
    if w.ndim == 0:
        w = float(w)
    return -w, w


def direction_coefficients(varpi, vartheta, geom: SystemGeometry) -> np.ndarray:
    """Unit direction (A1, A2, A3) of the in-plane ray at (varpi, vartheta)."""
    varpi = np.asarray(varpi, dtype=float)
    delta = geom.theta_t + np.asarray(vartheta, dtype=float)
    phi = np.arctan(np.tan(varpi) / np.cos(delta))
    a = geom.alpha_t
    c = np.cos(varpi) * np.cos(delta) / np.cos(phi)
    return np.stack(np.broadcast_arrays(c * np.cos(a + phi), c * np.sin(a + phi),
                                        np.cos(varpi) * np.sin(delta)), axis=-1)


def jacobian(tau, varpi):
    """Volume element of the (tau, varpi, vartheta) parametrisation."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise DomainError("tau must be >= 0")
    out = tau**2 * np.cos(varpi)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ScatterSample:
    tau: float
    varpi: float
    vartheta: float
    point_p: np.ndarray
    delta_t: float
    phi: float
    epsilon: float
    theta_s: float
    theta_v: float


def _angle_between(u, v):
    # atan2 form keeps precision near 0 and pi
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    return np.arctan2(cross, np.sum(u * v, axis=-1))


def scatter_point(tau: float, varpi: float, vartheta: float, geom: SystemGeometry) -> ScatterSample:
    if not tau > 0:
        raise DomainError("tau must be > 0")
    if not abs(vartheta) < geom.beta_t:
        raise DomainError("|vartheta| must be < beta_t")
    _, wmax = varpi_bounds(vartheta, geom.beta_t)
    if abs(varpi) > wmax * (1 + 1e-12):
        raise DomainError("|varpi| exceeds the beam half-width in this plane")
    delta = geom.theta_t + vartheta
    phi = math.atan(math.tan(varpi) / math.cos(delta))
    p = tau * direction_coefficients(varpi, vartheta, geom)
    to_r = geom.receiver - p
    eps = float(np.linalg.norm(to_r))
    return ScatterSample(
        tau=float(tau), varpi=float(varpi), vartheta=float(vartheta), point_p=p,
        delta_t=delta, phi=phi, epsilon=eps,
        theta_s=float(_angle_between(p, to_r)),
        theta_v=float(_angle_between(-to_r, geom.fov_axis)),
    )


# --- receiver cone ---------------------------------------------------------------

def receiver_cone_residual(point, geom: SystemGeometry):
    """cos^2(beta_r)*|X-R|^2 - (N_r.(X-R))^2; negative inside either nappe."""
    point = np.asarray(point, dtype=float)
    d = point - geom.receiver
    dist2 = np.sum(d * d, axis=-1)
    if np.any(dist2 == 0.0):
        raise DomainError("residual undefined at the receiver")
    proj = d @ geom.fov_axis
    out = math.cos(geom.beta_r) ** 2 * dist2 - proj**2
    return float(out) if np.ndim(out) == 0 else out


class TauKind(enum.IntEnum):
    EMPTY = 0
    HALF_LINE_FROM_TAU0 = 1
    HALF_LINE_FROM_TAU2 = 2
    SEGMENT = 3


@dataclass(frozen=True)
class TauInterval:
    kind: TauKind
    lo: float
    hi: float
    xi1: float
    xi2: float
    xi3: float
    discriminant: float

    @property
    def empty(self) -> bool:
        return self.kind == TauKind.EMPTY


def quadratic_roots(a, b, c, scale=1.0):
    """Real roots (r1 <= r2) of a t^2 + b t + c, NaN where absent.

    A near-zero ``a`` (relative to ``scale``, the typical |t|) is treated as linear;
    its single root is returned in r1 with r2 = NaN.
    """
    a, b, c = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c)))
    linear = np.abs(a) * scale**2 <= 1e-13 * (np.abs(b) * scale + np.abs(c))
    disc = b * b - 4 * a * c
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        q = -0.5 * (b + np.copysign(sq, b))
        r1 = q / a
        r2 = c / q
        lin = np.where(b != 0, -c / b, np.nan)
    lo = np.where(linear, lin, np.fmin(r1, r2))
    hi = np.where(linear, np.nan, np.fmax(r1, r2))
    # c == 0 and b == 0 gives q == 0; root 0 is double
    both_zero = ~linear & (q == 0)
    lo = np.where(both_zero, 0.0, lo)
    hi = np.where(both_zero, 0.0, hi)
    return lo, hi, disc, linear


def convex_quadratic_interval(a, b, c, h0, h1, t_lo=0.0, scale=1.0):
    """Parameter interval on a line inside one nappe of a cone.

    The cone is {q(t) = a t^2 + b t + c <= 0} intersected with the half-space
    h(t) = h0 + h1 t > 0 selecting the nappe.  A single nappe is convex, so the
    admissible set is one interval; returns (lo, hi, nonempty) with hi possibly inf.
    """
    a, b, c, h0, h1 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c, h0, h1)))
    r1, r2, _, _ = quadratic_roots(a, b, c, scale)
    fill = t_lo if np.isfinite(t_lo) else -np.inf
    roots = np.stack([r1, r2], axis=-1)
    roots = np.where(np.isnan(roots) | (roots <= t_lo), fill, roots)
    roots.sort(axis=-1)
    start = np.full(a.shape + (1,), float(t_lo))
    stop = np.full(a.shape + (1,), np.inf)
    bps = np.concatenate([start, roots, stop], axis=-1)
    left, right = bps[..., :-1], bps[..., 1:]
    valid = right > left
    with np.errstate(invalid="ignore"):
        rep = np.where(
            np.isfinite(left) & np.isfinite(right), 0.5 * (left + right),
            np.where(np.isfinite(left), left + 1.0 * scale + np.abs(left),
                     np.where(np.isfinite(right), right - 1.0 * scale - np.abs(right), 0.0)))
    q = a[..., None] * rep**2 + b[..., None] * rep + c[..., None]
    h = h0[..., None] + h1[..., None] * rep
    ok = valid & (q <= 0.0) & (h > 0.0)
    nonempty = ok.any(axis=-1)
    first = np.argmax(ok, axis=-1)
    last = ok.shape[-1] - 1 - np.argmax(ok[..., ::-1], axis=-1)
    lo = np.take_along_axis(left, first[..., None], axis=-1)[..., 0]
    hi = np.take_along_axis(right, last[..., None], axis=-1)[..., 0]
    lo = np.where(nonempty, lo, np.nan)
    hi = np.where(nonempty, hi, np.nan)
    return lo, hi, nonempty


def xi_coefficients(directions, geom: SystemGeometry):
    """Quadratic coefficients (xi1, xi2, xi3) of the ray/receiver-cone intersection."""
    directions = np.asarray(directions, dtype=float)
    a1, a2, a3 = directions[..., 0], directions[..., 1], directions[..., 2]
    tr, ar, r = geom.theta_r, geom.alpha_r, geom.range_r
    cb2 = math.cos(geom.beta_r) ** 2
    proj = math.cos(tr) * (a1 * math.cos(ar) + a2 * math.sin(ar)) + a3 * math.sin(tr)
    xi1 = -proj**2 + (a1**2 + a2**2 + a3**2) * cb2
    xi2 = 2 * r * proj * math.cos(tr) * math.sin(ar) - 2 * r * a2 * cb2
    xi3 = r**2 * (cb2 - math.cos(tr) ** 2 * math.sin(ar) ** 2)
    return xi1, xi2, np.broadcast_to(xi3, np.shape(xi1)).astype(float)


def tau_bounds(directions, geom: SystemGeometry):
    """Vectorised tau interval for rays from T; returns (lo, hi, kind, xi1, xi2, xi3, disc)."""
    directions = np.asarray(directions, dtype=float)
    xi1, xi2, xi3 = xi_coefficients(directions, geom)
    n = geom.fov_axis
    # nappe selector: N_r . (tau*A - R) > 0
    h1 = directions @ n
    h0 = np.full_like(h1, -geom.range_r * n[1])
    lo, hi, nonempty = convex_quadratic_interval(xi1, xi2, xi3, h0, h1, 0.0, geom.range_r)
    _, _, disc, linear = quadratic_roots(xi1, xi2, xi3, geom.range_r)
    kind = np.where(
        ~nonempty, TauKind.EMPTY,
        np.where(np.isfinite(hi), TauKind.SEGMENT,
                 np.where(linear, TauKind.HALF_LINE_FROM_TAU0, TauKind.HALF_LINE_FROM_TAU2)))
    return lo, hi, kind, xi1, xi2, xi3, disc


def tau_interval(vartheta: float, varpi: float, geom: SystemGeometry) -> TauInterval:
    """Distances along the ray (vartheta, varpi) that lie inside the receiver FoV.

    Only the nappe on the FoV side of R counts.  When T itself is inside the FoV
    the result is a segment starting at 0 (or a half-line from 0).
    """
    a = direction_coefficients(varpi, vartheta, geom)
    lo, hi, kind, xi1, xi2, xi3, disc = tau_bounds(a, geom)
    return TauInterval(TauKind(int(kind)), float(lo), float(hi),
                       float(xi1), float(xi2), float(xi3), float(disc))


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def at(self, omega):
        omega = np.asarray(omega, dtype=float)
        return self.origin + omega[..., None] * self.direction


def boundary_rays(geom: SystemGeometry) -> dict[str, Ray]:
    """Upper/lower generators of the beam and FoV cones in their azimuth planes."""
    out = {}
    for sign, label in ((1, "+"), (-1, "-")):
        d_t = geom.theta_t + sign * geom.beta_t
        d_r = geom.theta_r + sign * geom.beta_r
        out["t" + label] = Ray(np.zeros(3), unit_vector(d_t, geom.alpha_t) / math.cos(geom.beta_t))
        out["r" + label] = Ray(geom.receiver, unit_vector(d_r, geom.alpha_r) / math.cos(geom.beta_r))
    return out
