"""Blockage weighting factor: the rotating-plane rule set and an exact ray/box test."""
from __future__ import annotations

import itertools

import numpy as np

from .frames import (
    BlockageClassification,
    RxPlaneFrame,
    TxPlaneFrame,
    rx_condition_of,
    rx_plane_frame,
    rx_tilt_of,
    tx_case_of,
    tx_plane_frame,
    tx_tilt_of,
)
from .scene import ObstacleBox, ScatterSample, SystemGeometry


# --- exact geometry -----------------------------------------------------------------

def _slab(p0, d, lo, hi):
    """Per-point (t_enter, t_exit) of the infinite line p0 + t d through the open box."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - p0) / d
        t2 = (hi - p0) / d
    parallel = d == 0.0
    inside = (p0 > lo) & (p0 < hi)
    tmin = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
    tmax = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
    return tmin.max(axis=-1), tmax.min(axis=-1)


def segment_hits_box(p0, p1, lo, hi):
    """True where the closed segment p0->p1 meets the open box (lo, hi)."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    enter, leave = _slab(p0, p1 - p0, np.asarray(lo, float), np.asarray(hi, float))
    return np.maximum(enter, 0.0) < np.minimum(leave, 1.0)


def g_wei_oracle(point_p, geom: SystemGeometry, obstacle: ObstacleBox | None):
    """1 where neither T->P nor P->R passes through the obstacle interior, else 0."""
    p = np.asarray(point_p, dtype=float)
    if obstacle is None:
        out = np.ones(p.shape[:-1], dtype=np.int8)
    else:
        lo, hi = obstacle.lo, obstacle.hi
        blocked = segment_hits_box(geom.transmitter, p, lo, hi) | segment_hits_box(p, geom.receiver, lo, hi)
        out = np.where(blocked, 0, 1).astype(np.int8)
    return int(out) if out.ndim == 0 else out


def transmitter_entry(directions, obstacle: ObstacleBox):
    """Distance from T at which each unit ray enters the obstacle (inf if never)."""
    d = np.asarray(directions, dtype=float)
    enter, leave = _slab(np.zeros_like(d), d, obstacle.lo, obstacle.hi)
    enter = np.maximum(enter, 0.0)
    return np.where(enter < leave, enter, np.inf)


_PAIRS = list(itertools.combinations(range(9), 2))


def receiver_shadow(directions, geom: SystemGeometry, obstacle: ObstacleBox):
    """Interval (lo, hi) of tau for which the segment tau*u -> R crosses the obstacle.

    Writing the segment as (1-s) R + v u with v = s*tau, the admissible (s, v) form a
    convex polygon; tau = v/s is linear-fractional on it, so its range is an interval
    whose ends sit on polygon vertices.  Returns NaN bounds when the shadow is empty.
    """
    u = np.asarray(directions, dtype=float)
    shape = u.shape[:-1]
    u = u.reshape(-1, 3)
    n = u.shape[0]
    rr = geom.receiver
    lo, hi = obstacle.lo, obstacle.hi
    # constraints a*s + b*v <= c, stacked as (n, 9)
    a = np.empty((n, 9))
    b = np.empty((n, 9))
    c = np.empty((n, 9))
    for k in range(3):
        a[:, k], b[:, k], c[:, k] = rr[k], -u[:, k], rr[k] - lo[k]
        a[:, 3 + k], b[:, 3 + k], c[:, 3 + k] = -rr[k], u[:, k], hi[k] - rr[k]
    a[:, 6], b[:, 6], c[:, 6] = 1.0, 0.0, 1.0
    a[:, 7], b[:, 7], c[:, 7] = -1.0, 0.0, 0.0
    a[:, 8], b[:, 8], c[:, 8] = 0.0, -1.0, 0.0
    scale = max(float(np.abs(c).max()), 1.0)
    best_lo = np.full(n, np.inf)
    best_hi = np.full(n, -np.inf)
    for i, j in _PAIRS:
        det = a[:, i] * b[:, j] - a[:, j] * b[:, i]
        ok = np.abs(det) > 1e-14
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (c[:, i] * b[:, j] - c[:, j] * b[:, i]) / det
            v = (a[:, i] * c[:, j] - a[:, j] * c[:, i]) / det
            resid = a * s[:, None] + b * v[:, None] - c
        ok &= np.all(resid <= 1e-9 * scale, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(s > 1e-15, v / np.where(s > 1e-15, s, 1.0), np.inf)
        ratio = np.where(ok, ratio, np.nan)
        best_lo = np.fmin(best_lo, ratio)
        best_hi = np.fmax(best_hi, ratio)
    empty = ~np.isfinite(best_lo) & ~(best_lo == np.inf)
    empty |= best_lo > best_hi
    # a polygon of zero area (touching only) is treated as no shadow
    best_lo = np.where(empty | (best_lo >= best_hi), np.nan, best_lo)
    best_hi = np.where(np.isnan(best_lo), np.nan, best_hi)
    return best_lo.reshape(shape), best_hi.reshape(shape)


# --- rule set ---------------------------------------------------------------------------

def _co(x, a, b):
    return (x >= a) & (x < b)


def _oc(x, a, b):
    return (x > a) & (x <= b)


def _cc(x, a, b):
    return (x >= a) & (x <= b)


def _distance_bound(length, inner, angle, ref):
    den = np.sin(angle + inner - ref)
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = length * np.sin(inner) / den
    return np.where(den > 0.0, bound, np.inf)


def paper_rule(case, cond, t, rho, tp, rp, tx: TxPlaneFrame, rx: RxPlaneFrame):
    """Vectorised weighting factor from the case/condition interval rules.

    ``t`` and ``rho`` are the in-plane angles of the scatter point seen from T and R,
    ``tp``/``rp`` its distances to T and R.  Frame attributes may be arrays that
    broadcast against the sample arrays.
    """
    case = np.asarray(case)
    cond = np.asarray(cond)
    o_lo, o_hi = tx.omega_min, tx.omega_max
    p_lo, p_hi = tx.psi_min, tx.psi_max
    t_cc = tx.edges["c"].psi
    r_lo, r_hi = rx.omega_min, rx.omega_max
    q_lo, q_hi = rx.psi_min, rx.psi_max
    r_dd = rx.edges["d"].psi

    tx_ok = tp < _distance_bound(tx.edges["d"].distance, tx.facade_angle, t, p_lo)
    rx_ok = rp < _distance_bound(rx.edges["c"].distance, rx.facade_angle, rho, q_lo)

    t_above = _oc(t, p_hi, o_hi)            # beam part past the far edge
    r_above = _oc(rho, q_hi, r_hi)          # FoV part past the far edge
    r_below = _co(rho, r_lo, q_lo)          # FoV part short of the near edge
    c2, c3, c4, c5 = (cond == k for k in (2, 3, 4, 5))
    c25 = c2 | c3 | c4 | c5

    # receiver-side intervals shared by the facade-bounded terms
    r_dd_cap = np.minimum(r_hi, r_dd)
    r_interval = (
        (c2 & _cc(rho, r_lo, r_dd)) | (c3 & _cc(rho, q_lo, r_dd))
        | (c4 & _cc(rho, r_lo, r_dd_cap)) | (c5 & _cc(rho, q_lo, r_dd_cap))
    ) & rx_ok

    def facade_term(t_from, t_to):
        return c25 & _cc(t, t_from, t_to) & tx_ok & r_interval

    case1 = (cond == 1) | (c2 & r_above) | (c3 & (r_below | r_above)) | (c5 & r_below)

    case2 = ((cond == 1) & t_above) | ((c2 | c3) & t_above & r_above) \
        | ((c3 | c5) & r_below) | facade_term(o_lo, t_cc)

    t_before = _co(t, o_lo, p_lo)
    case3 = ((cond == 1) & (t_before | t_above)) | (c25 & t_before) \
        | (c2 & t_above & r_above) | (c5 & _cc(t, p_lo, o_hi) & r_below) \
        | (c3 & ((r_below & _cc(t, p_lo, p_hi)) | ((r_below | r_above) & t_above))) \
        | facade_term(p_lo, t_cc)

    case4 = ((c3 | c5) & r_below) | facade_term(o_lo, np.minimum(o_hi, t_cc))

    case5 = ((cond <= 5) & (cond >= 1) & t_before) | ((c3 | c5) & _cc(t, p_lo, o_hi) & r_below) \
        | facade_term(p_lo, np.minimum(o_hi, t_cc))

    out = np.select(
        [cond == 6, case == 6, case == 1, case == 2, case == 3, case == 4, case == 5],
        [True, True, case1, case2, case3, case4, case5],
        default=False,
    )
    return out.astype(np.int8)


def g_wei_paper(sample: ScatterSample, classification: BlockageClassification, frames,
                obstacle: ObstacleBox | None = None) -> int:
    """Weighting factor of one scatter sample from its classification and frames."""
    tx, rx = frames
    p = sample.point_p
    t = classification.psi_t_esp if classification.psi_t_esp is not None else tx.angle_of(p)
    rho = classification.psi_r_esp if classification.psi_r_esp is not None else rx.angle_of(p)
    w = paper_rule(classification.tx_case, classification.rx_condition, t, rho,
                   sample.tau, sample.epsilon, tx, rx)
    return int(np.asarray(w).reshape(-1)[0])


def g_wei_paper_points(points, geom: SystemGeometry, obstacle: ObstacleBox | None,
                       exact_omega: bool = False):
    """Rule-set weighting factor for arbitrary in-overlap points.

    Returns (weights, case, condition, t, rho).  Points whose tables admit no row get
    case or condition 0 and weight 0.
    """
    p = np.asarray(points, dtype=float)
    if obstacle is None:
        ones = np.ones(p.shape[:-1], dtype=np.int8)
        return ones, ones * 6, ones * 6, None, None
    tx = tx_plane_frame(tx_tilt_of(p, geom), geom, obstacle, exact_omega)
    rx = rx_plane_frame(rx_tilt_of(p, geom), geom, obstacle, exact_omega)
    case = tx_case_of(tx)
    cond = rx_condition_of(rx)
    t = tx.angle_of(p)
    rho = rx.angle_of(p)
    tp = np.linalg.norm(p, axis=-1)
    rp = np.linalg.norm(p - geom.receiver, axis=-1)
    w = paper_rule(case, cond, t, rho, tp, rp, tx, rx)
    return w, case, cond, t, rho


def boundary_margin(points, geom: SystemGeometry, obstacle: ObstacleBox,
                    exact_omega: bool = False):
    """Smallest angular distance (rad) from each point to any interval endpoint or
    ordering tie used by the rule set, with the distance bounds expressed as angles."""
    p = np.asarray(points, dtype=float)
    tx = tx_plane_frame(tx_tilt_of(p, geom), geom, obstacle, exact_omega)
    rx = rx_plane_frame(rx_tilt_of(p, geom), geom, obstacle, exact_omega)
    t = tx.angle_of(p)
    rho = rx.angle_of(p)
    t_marks = [tx.omega_min, tx.omega_max] + [tx.edges[m].psi for m in "abcd"]
    r_marks = [rx.omega_min, rx.omega_max] + [rx.edges[m].psi for m in "abcd"]
    margin = np.full(t.shape, np.inf)
    for m in t_marks:
        margin = np.minimum(margin, np.abs(t - m))
    for m in r_marks:
        margin = np.minimum(margin, np.abs(rho - m))
    for group in (t_marks, r_marks):
        for a, b in itertools.combinations(group, 2):
            margin = np.minimum(margin, np.abs(np.asarray(a) - np.asarray(b)))
    tp = np.linalg.norm(p, axis=-1)
    rp = np.linalg.norm(p - geom.receiver, axis=-1)
    tb = _distance_bound(tx.edges["d"].distance, tx.facade_angle, t, tx.psi_min)
    rb = _distance_bound(rx.edges["c"].distance, rx.facade_angle, rho, rx.psi_min)
    with np.errstate(invalid="ignore"):
        margin = np.minimum(margin, np.where(np.isfinite(tb), np.abs(tp - tb) / tp, np.inf))
        margin = np.minimum(margin, np.where(np.isfinite(rb), np.abs(rp - rb) / rp, np.inf))
    return margin
