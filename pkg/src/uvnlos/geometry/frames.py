"""Rotating-plane frames at the transmitter and receiver, and case classification.

A transmitter plane is tilted by ``delta_t = theta_t + vartheta`` about the horizontal
line through T perpendicular to the beam azimuth.  Inside it, angles are measured
from the ray TK (the plane's intersection with the YZ plane, pointing to +y),
positive toward -x.  Receiver planes pass through R and measure angles from RS
(pointing to -y), again positive toward -x.  Every obstacle edge lies at x < 0, so
its angle is positive and coincides with the unsigned arccos form; signed angles
only matter for points on the +x side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateFrame, DomainError, UnorderedFrame
from .scene import ObstacleBox, SystemGeometry

EDGES = "abcd"
TIE_TOL = 1e-12


def plane_normal(delta, alpha):
    """Unit normal of the plane tilted by ``delta`` that contains the horizontal
    direction perpendicular to azimuth ``alpha``."""
    delta = np.asarray(delta, dtype=float)
    sd = np.sin(delta)
    return np.stack(np.broadcast_arrays(-math.cos(alpha) * sd, -math.sin(alpha) * sd,
                                        np.cos(delta)), axis=-1)


def _xi_literal(delta, half_width_arg, alpha, tilt):
    """Plane-normal coefficients in their unnormalised closed form."""
    phi = np.arctan(half_width_arg / np.cos(delta))
    sec2 = 1.0 / np.cos(tilt) ** 2
    xi_a = -math.cos(alpha) * sec2 * np.sin(2 * delta) * np.tan(phi)
    xi_b = -math.sin(alpha) * sec2 * np.sin(2 * delta) * np.tan(phi)
    xi_c = 2 * sec2 * np.cos(delta) ** 2 * np.tan(phi)
    return xi_a, xi_b, xi_c, phi


def _in_plane_width(tilt, beta):
    radicand = np.clip(math.tan(beta) ** 2 - np.tan(tilt) ** 2, 0.0, None)
    return np.sqrt(radicand) * np.cos(tilt)


def _law_of_sines_angle(apex, a, b):
    """Angle at ``apex`` between (a - apex) and (b - apex)."""
    u = a - apex
    v = b - apex
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    return np.arctan2(cross, np.sum(u * v, axis=-1))


def _dot(a, b):
    return np.sum(a * b, axis=-1)


@dataclass(frozen=True)
class EdgeCrossing:
    """Where a rotating plane cuts a vertical obstacle edge."""

    psi: np.ndarray | float
    point: np.ndarray
    distance: np.ndarray | float


def _scalarise(value):
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class _PlaneFrame:
    tilt: np.ndarray | float
    delta: np.ndarray | float
    xi_a: np.ndarray | float
    xi_b: np.ndarray | float
    xi_c: np.ndarray | float
    phi: np.ndarray | float
    normal: np.ndarray
    k_hat: np.ndarray
    j_hat: np.ndarray
    edges: dict
    omega_min: np.ndarray | float
    omega_max: np.ndarray | float
    facade_angle: np.ndarray | float
    origin: np.ndarray

    @property
    def psi_edges(self) -> dict:
        return {m: e.psi for m, e in self.edges.items()}

    def angle_of(self, points):
        """Signed in-plane angle of origin->points measured from the reference ray."""
        d = np.asarray(points, dtype=float) - self.origin
        return _scalarise(np.arctan2(_dot(d, self.j_hat), _dot(d, self.k_hat)))


class TxPlaneFrame(_PlaneFrame):
    """Transmitter frame; ``facade_angle`` is the angle at the d-edge crossing
    between T and the c-edge crossing."""

    @property
    def vartheta(self):
        return self.tilt

    @property
    def phi_t(self):
        return self.phi

    @property
    def psi_min(self):
        return self.edges["d"].psi

    @property
    def psi_max(self):
        return self.edges["b"].psi


class RxPlaneFrame(_PlaneFrame):
    """Receiver frame; ``facade_angle`` is the angle at the c-edge crossing
    between R and the d-edge crossing."""

    @property
    def sigma(self):
        return self.tilt

    @property
    def phi_r(self):
        return self.phi

    @property
    def cap_c(self):
        """In-plane FoV half-width."""
        return 0.5 * (self.omega_max - self.omega_min)

    @property
    def psi_min(self):
        return self.edges["c"].psi

    @property
    def psi_max(self):
        return self.edges["a"].psi


def _build(cls, tilt, elevation, beta, alpha, origin, receiver_side, obstacle, exact_omega):
    tilt = np.asarray(tilt, dtype=float)
    if np.any(np.abs(tilt) >= beta):
        raise DomainError("plane tilt must satisfy |tilt| < half-angle")
    delta = elevation + tilt
    n = plane_normal(delta, alpha)
    knorm = np.hypot(n[..., 1], n[..., 2])
    if np.any(knorm < 1e-12):
        raise DegenerateFrame("plane is parallel to YZ")
    sign = -1.0 if receiver_side else 1.0
    kh = sign * np.stack([np.zeros_like(knorm), n[..., 2], -n[..., 1]], axis=-1) / knorm[..., None]
    jh = np.cross(kh, n) if receiver_side else np.cross(n, kh)
    width = _in_plane_width(tilt, beta)
    xi_a, xi_b, xi_c, phi = _xi_literal(delta, width, alpha, tilt)
    half = np.arctan(width)
    if exact_omega:
        f = np.stack([np.cos(delta) * math.cos(alpha), np.cos(delta) * math.sin(alpha),
                      np.sin(delta)], axis=-1)
        centre = np.arctan2(_dot(f, jh), _dot(f, kh))
    elif receiver_side:
        centre = np.full(tilt.shape, -alpha - 0.5 * math.pi)
    else:
        centre = np.full(tilt.shape, alpha - 0.5 * math.pi)
    oy = origin[1]
    edges = {}
    for m in EDGES:
        x, y = obstacle.edge_xy(m)
        z = -(n[..., 0] * x + n[..., 1] * (y - oy)) / n[..., 2]
        p = np.stack(np.broadcast_arrays(np.float64(x), np.float64(y), z), axis=-1)
        d = p - origin
        edges[m] = EdgeCrossing(_scalarise(np.arctan2(_dot(d, jh), _dot(d, kh))), p,
                                _scalarise(np.linalg.norm(d, axis=-1)))
    if receiver_side:
        facade = _law_of_sines_angle(edges["c"].point, origin, edges["d"].point)
    else:
        facade = _law_of_sines_angle(edges["d"].point, origin, edges["c"].point)
    s = _scalarise
    frame = cls(tilt=s(tilt), delta=s(delta), xi_a=s(xi_a), xi_b=s(xi_b), xi_c=s(xi_c),
                phi=s(phi), normal=n, k_hat=kh, j_hat=jh, edges=edges,
                omega_min=s(centre - half), omega_max=s(centre + half),
                facade_angle=s(facade), origin=origin)
    return frame


def tx_plane_frame(vartheta, geom: SystemGeometry, obstacle: ObstacleBox,
                   exact_omega: bool = False) -> TxPlaneFrame:
    """Transmitter plane frame for tilt ``vartheta`` (scalar or array).

    With ``exact_omega`` the beam edges are measured from TK inside the tilted plane;
    otherwise the azimuth-based form alpha_t + varpi - pi/2 is used, which is exact
    only for an untilted plane.
    """
    return _build(TxPlaneFrame, vartheta, geom.theta_t, geom.beta_t, geom.alpha_t,
                  geom.transmitter, False, obstacle, exact_omega)


def rx_plane_frame(sigma, geom: SystemGeometry, obstacle: ObstacleBox,
                   exact_omega: bool = False) -> RxPlaneFrame:
    """Receiver plane frame for tilt ``sigma`` (scalar or array)."""
    return _build(RxPlaneFrame, sigma, geom.theta_r, geom.beta_r, geom.alpha_r,
                  geom.receiver, True, obstacle, exact_omega)


def tx_tilt_of(points, geom: SystemGeometry):
    """Plane tilt vartheta of the transmitter plane containing each point."""
    points = np.asarray(points, dtype=float)
    h = points[..., 0] * math.cos(geom.alpha_t) + points[..., 1] * math.sin(geom.alpha_t)
    return np.arctan2(points[..., 2], h) - geom.theta_t


def rx_tilt_of(points, geom: SystemGeometry):
    """Plane tilt sigma of the receiver plane containing each point."""
    d = np.asarray(points, dtype=float) - geom.receiver
    h = d[..., 0] * math.cos(geom.alpha_r) + d[..., 1] * math.sin(geom.alpha_r)
    return np.arctan2(d[..., 2], h) - geom.theta_r


# --- ordering tables -----------------------------------------------------------------

def _ge(a, b, tol):
    return a >= b - tol


def _gt(a, b, tol):
    return a > b + tol


def _rows(omin, omax, pmin, pmax, tol, strict_row3):
    ge = lambda a, b: _ge(a, b, tol)  # noqa: E731
    gt = lambda a, b: _gt(a, b, tol)  # noqa: E731
    row3_tail = gt(pmin, omin) if strict_row3 else ge(pmin, omin)
    return [
        gt(omax, omin) & ge(omin, pmax) & gt(pmax, pmin),
        gt(omax, pmax) & gt(pmax, omin) & ge(omin, pmin),
        gt(omax, pmax) & gt(pmax, pmin) & row3_tail,
        ge(pmax, omax) & gt(omax, omin) & ge(omin, pmin),
        ge(pmax, omax) & gt(omax, pmin) & gt(pmin, omin),
        gt(pmax, pmin) & ge(pmin, omax) & gt(omax, omin),
    ]


def order_index(omin, omax, pmin, pmax, strict_row3: bool, tol: float = TIE_TOL):
    """Row number 1-6 of the ordering table; 0 where no row applies.

    Rows are tried top-down with tolerant comparisons (ties count as equality);
    anything left unmatched is retried with exact comparisons.
    """
    arrays = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (omin, omax, pmin, pmax)))
    if any(np.isnan(a).any() for a in arrays):
        raise UnorderedFrame("NaN angle in ordering")
    out = np.zeros(arrays[0].shape, dtype=np.int8)
    for t in (tol, 0.0):
        for idx, hit in enumerate(_rows(*arrays, t, strict_row3), start=1):
            out = np.where((out == 0) & hit, idx, out)
    return out


@dataclass(frozen=True)
class BlockageClassification:
    tx_case: int
    rx_condition: int
    psi_t_esp: float | None = None
    psi_r_esp: float | None = None


def tx_case_of(frame: TxPlaneFrame):
    return order_index(frame.omega_min, frame.omega_max, frame.psi_min, frame.psi_max,
                       strict_row3=False)


def rx_condition_of(frame: RxPlaneFrame):
    return order_index(frame.omega_min, frame.omega_max, frame.psi_min, frame.psi_max,
                       strict_row3=True)


def classify(tx_frame: TxPlaneFrame, rx_frame: RxPlaneFrame, point=None) -> BlockageClassification:
    """Case (transmitter) and condition (receiver) for a pair of scalar frames."""
    case = int(np.asarray(tx_case_of(tx_frame)).reshape(-1)[0])
    cond = int(np.asarray(rx_condition_of(rx_frame)).reshape(-1)[0])
    if case == 0 or cond == 0:
        raise UnorderedFrame(f"angles admit no table row (case {case}, condition {cond})")
    t_esp = r_esp = None
    if point is not None:
        t_esp = float(np.asarray(tx_frame.angle_of(point)).reshape(-1)[0])
        r_esp = float(np.asarray(rx_frame.angle_of(point)).reshape(-1)[0])
    return BlockageClassification(case, cond, t_esp, r_esp)
