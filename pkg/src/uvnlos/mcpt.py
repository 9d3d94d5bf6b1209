"""Monte-Carlo photon tracing with a single collision and next-event estimation.

Each photon leaves T uniformly over the beam cap and interacts once: either it
scatters in the air before reaching the obstacle, or it lands on the obstacle
(the facade reflects, any other face absorbs).  Both branches are scored for
every photon: the scatter point is drawn inside the unobstructed stretch of the
ray and weighted by its physical collision density, while the facade hit is
weighted by the probability of reaching it.  At each interaction the expected
energy reaching the receiver aperture is scored directly (a shadow ray to R), so
no photon has to hit the tiny aperture by chance.

The collision distance comes from an even mixture of the truncated exponential
free path and a Lorentzian centred on the ray's closest approach to R.  The
Lorentzian cancels the 1/eps^2 peak of the next-event score when the receiver
sits inside the beam, which keeps the variance finite and the standard error
shrinking as 1/sqrt(n).

Randomness is counter based: batch ``b`` of seed ``s`` always draws from the
Philox stream keyed by (s, b), so results do not depend on the worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import path_loss_db
from .errors import DomainError
from .geometry.blockage import _slab, segment_hits_box
from .geometry.scene import ObstacleBox, SystemGeometry
from .reflection import ReflectionSurface, _phong_cos, specular_direction
from .scattering import Atmosphere, phase

DB_PER_REL = 10.0 / math.log(10.0)


@dataclass(frozen=True)
class McptSpec:
    n_photons: int = 1_000_000
    survival_threshold: float = 1e-10
    rng_seed: int = 0
    batch_size: int = 1 << 16

    def __post_init__(self):
        if self.n_photons < 1:
            raise DomainError("n_photons must be >= 1")
        if not 0.0 < self.survival_threshold < 1.0:
            raise DomainError("survival_threshold must lie in (0, 1)")
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if not 0 <= self.rng_seed < 2**64:
            raise DomainError("rng_seed must be a 64-bit unsigned integer")


@dataclass
class McptEstimate:
    q_r_hat: float
    std_error: float
    path_loss_db: float
    n_contributing: int
    q_sca_hat: float = 0.0
    q_ref_hat: float = 0.0
    n_photons: int = 0

    @property
    def stderr_db(self) -> float:
        if self.q_r_hat <= 0.0:
            return math.inf
        return DB_PER_REL * self.std_error / self.q_r_hat

    @property
    def insufficient(self) -> bool:
        return self.n_contributing == 0


def _basis(axis):
    helper = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(axis, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(axis, u)


def sample_beam_direction(rng: np.random.Generator, geom: SystemGeometry, n: int | None = None):
    """Direction(s) uniform over the beam's spherical cap."""
    size = 1 if n is None else n
    axis = geom.beam_axis
    u, v = _basis(axis)
    cos_t = 1.0 - rng.random(size) * (1.0 - math.cos(geom.beta_t))
    sin_t = np.sqrt(np.clip(1.0 - cos_t**2, 0.0, None))
    phi = 2.0 * math.pi * rng.random(size)
    d = (cos_t[:, None] * axis + sin_t[:, None] * (np.cos(phi)[:, None] * u + np.sin(phi)[:, None] * v))
    return d[0] if n is None else d


def batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, batch]))


def _receiver_terms(points, geom, obstacle):
    """(eps, unit vector to R, cos of the arrival angle, in-FoV-and-visible mask)."""
    d = geom.receiver - points
    eps = np.linalg.norm(d, axis=-1)
    e_hat = d / eps[:, None]
    cos_v = -(e_hat @ geom.fov_axis)
    ok = cos_v >= math.cos(geom.beta_r)
    if obstacle is not None and ok.any():
        idx = np.flatnonzero(ok)
        ok[idx] &= ~segment_hits_box(points[idx], geom.receiver, obstacle.lo, obstacle.hi)
    return eps, e_hat, cos_v, ok


def _collision_distance(rng, dirs, d_hit, geom, ks):
    """Collision distances on [0, d_hit) and their physical weight ks*exp(-ks*l)/q(l)."""
    n = len(dirs)
    # truncated exponential (the analog free path)
    reach = -np.expm1(-ks * d_hit)
    # truncated Lorentzian around the closest approach to R
    tau_c = dirs @ geom.receiver
    miss = np.linalg.norm(geom.receiver - tau_c[:, None] * dirs, axis=1)
    miss = np.maximum(miss, 1e-9 * geom.range_r)
    a0 = np.arctan(-tau_c / miss)
    a1 = np.arctan((d_hit - tau_c) / miss)
    u = rng.random(n)
    pick_exp = rng.random(n) < 0.5
    ell = np.where(pick_exp, -np.log1p(-u * reach) / ks, tau_c + miss * np.tan(a0 + u * (a1 - a0)))
    ell = np.clip(ell, 0.0, d_hit)
    q_exp = ks * np.exp(-ks * ell) / reach
    q_lor = miss / ((miss**2 + (ell - tau_c) ** 2) * (a1 - a0))
    return ell, ks * np.exp(-ks * ell) / (0.5 * q_exp + 0.5 * q_lor)


def _trace_batch(n, rng, geom, atm, obstacle, surface, threshold):
    """Per-photon scores (scatter, reflection) for one batch."""
    dirs = sample_beam_direction(rng, geom, n)
    sca = np.zeros(n)
    ref = np.zeros(n)
    if obstacle is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = obstacle.lo / dirs
            t_hi = obstacle.hi / dirs
        near = np.where(dirs != 0.0, np.minimum(t_lo, t_hi), -np.inf)
        face_axis = np.argmax(near, axis=1)  # axis of the slab entered last
        enter, leave = _slab(np.zeros_like(dirs), dirs, obstacle.lo, obstacle.hi)
        enter = np.maximum(enter, 0.0)
        hit = enter < leave
        d_hit = np.where(hit, enter, np.inf)
    else:
        d_hit = np.full(n, np.inf)
        face_axis = np.zeros(n, dtype=int)

    # scattering events, one per photon with a non-empty free stretch
    s_idx = np.flatnonzero(d_hit > 0.0)
    if s_idx.size:
        ell, w_path = _collision_distance(rng, dirs[s_idx], d_hit[s_idx], geom, atm.ks)
        w0 = np.exp(-atm.ka * ell)
        alive = w0 >= threshold
        s_idx, ell, w0 = s_idx[alive], ell[alive], w0[alive] * w_path[alive]
        p = ell[:, None] * dirs[s_idx]
        eps, e_hat, cos_v, ok = _receiver_terms(p, geom, obstacle)
        mu = np.clip(np.sum(dirs[s_idx] * e_hat, axis=1), -1.0, 1.0)
        score = w0 * phase(mu, atm) * geom.aperture_area * cos_v / eps**2 * np.exp(-atm.ke * eps)
        sca[s_idx] = np.where(ok, score, 0.0)

    # facade reflections (the face whose entry plane is x = x_c)
    if obstacle is not None and surface is not None and surface.r_r > 0.0:
        on_facade = np.isfinite(d_hit) & (face_axis == 0) & (dirs[:, 0] < 0.0)
        r_idx = np.flatnonzero(on_facade)
        if r_idx.size:
            dist = d_hit[r_idx]
            w0 = np.exp(-atm.ka * dist)
            alive = w0 >= threshold
            # probability of flying unscattered up to the facade
            r_idx, dist, w0 = r_idx[alive], dist[alive], w0[alive] * np.exp(-atm.ks * dist[alive])
            x = dist[:, None] * dirs[r_idx]
            x[:, 0] = obstacle.x_c
            eps, e_hat, cos_v, ok = _receiver_terms(x, geom, None)
            cos_1 = e_hat[:, 0]
            ok &= cos_1 > 0.0
            cos_2 = np.sum(e_hat * specular_direction(dirs[r_idx]), axis=1)
            pattern = _phong_cos(cos_1, cos_2, surface.eta, surface.m_s)
            score = (w0 * surface.r_r * pattern * geom.aperture_area * cos_v / eps**2
                     * np.exp(-atm.ke * eps))
            ref[r_idx] = np.where(ok, score, 0.0)
    return sca, ref


def _batch_moments(b, spec, geom, atm, obstacle, surface):
    start = b * spec.batch_size
    n = min(spec.batch_size, spec.n_photons - start)
    sca, ref = _trace_batch(n, batch_rng(spec.rng_seed, b), geom, atm, obstacle, surface,
                            spec.survival_threshold)
    tot = sca + ref
    return (math.fsum(sca), math.fsum(ref), math.fsum(tot), math.fsum(tot * tot),
            int(np.count_nonzero(tot)))


def trace(geom: SystemGeometry, atm: Atmosphere, obstacle: ObstacleBox | None,
          surface: ReflectionSurface | None, spec: McptSpec = McptSpec(),
          workers: int | None = None) -> McptEstimate:
    """Estimate the received energy by photon tracing."""
    n_batches = -(-spec.n_photons // spec.batch_size)
    if workers is None:
        try:
            workers = max(1, int(os.environ.get("UVNLOS_THREADS", "1")))
        except ValueError:
            workers = 1

    def job(b):
        return _batch_moments(b, spec, geom, atm, obstacle, surface)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(n_batches)))
    else:
        parts = [job(b) for b in range(n_batches)]
    n = spec.n_photons
    s_sca = math.fsum(p[0] for p in parts)
    s_ref = math.fsum(p[1] for p in parts)
    s1 = math.fsum(p[2] for p in parts)
    s2 = math.fsum(p[3] for p in parts)
    count = sum(p[4] for p in parts)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
    q_t = geom.pulse_energy
    q = q_t * mean
    se = q_t * math.sqrt(var / n)
    return McptEstimate(q_r_hat=q, std_error=se, path_loss_db=path_loss_db(q_t, q),
                        n_contributing=count, q_sca_hat=q_t * s_sca / n, q_ref_hat=q_t * s_ref / n,
                        n_photons=n)
