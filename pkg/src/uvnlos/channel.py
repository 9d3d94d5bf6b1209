"""Total received energy, path loss and the two figure sweeps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import UvnlosError
from .geometry.scene import ObstacleBox, SystemGeometry, range_scaled_obstacle, validate_geometry
from .reflection import ReflectionSurface, reflected_energy
from .scattering import Atmosphere, QuadratureSpec, scattered_energy


def path_loss_db(q_t: float, q_r: float) -> float:
    """10 log10(q_t / q_r); +inf for a channel that delivers nothing."""
    if q_r <= 0.0:
        return math.inf
    return 10.0 * math.log10(q_t / q_r)


@dataclass
class ChannelResult:
    q_sca: float
    q_ref: float
    q_total: float
    path_loss_db: float
    pulse_energy: float = 1.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def pl_sca_db(self) -> float:
        return path_loss_db(self.pulse_energy, self.q_sca)

    @property
    def pl_ref_db(self) -> float:
        return path_loss_db(self.pulse_energy, self.q_ref)

    @property
    def blocked_fraction(self) -> float:
        return self.diagnostics.get("blocked_fraction", 0.0)


def _compose(geom, q_sca, q_ref, diagnostics):
    q_total = q_sca + q_ref
    diagnostics["no_signal"] = q_total <= 0.0
    return ChannelResult(q_sca, q_ref, q_total, path_loss_db(geom.pulse_energy, q_total),
                         geom.pulse_energy, diagnostics)


def total_energy(geom: SystemGeometry, atm: Atmosphere, obstacle: ObstacleBox | None,
                 surface: ReflectionSurface | None, quad: QuadratureSpec = QuadratureSpec(),
                 blockage: str = "paper", exact_omega: bool = True) -> ChannelResult:
    """Scattered plus facade-reflected energy at the receiver.

    Validity problems of the scene are listed in ``diagnostics['validity']`` but do
    not stop the computation.
    """
    report = validate_geometry(geom, obstacle)
    sca = scattered_energy(geom, atm, obstacle, quad, blockage=blockage, exact_omega=exact_omega)
    if surface is None or obstacle is None:
        q_ref, ref_diag = 0.0, {"active_region_fraction": 0.0}
    else:
        ref = reflected_energy(geom, atm, obstacle, surface, quad)
        q_ref, ref_diag = ref.q_ref, ref.diagnostics
    diag = dict(sca.diagnostics)
    diag["active_region_fraction"] = ref_diag.get("active_region_fraction", 0.0)
    diag["validity"] = report.codes
    return _compose(geom, sca.q_sca, q_ref, diag)


def no_obstacle_baseline(geom: SystemGeometry, atm: Atmosphere,
                         quad: QuadratureSpec = QuadratureSpec()) -> ChannelResult:
    """Single-scattering channel with nothing in the way and no reflection."""
    sca = scattered_energy(geom, atm, None, quad)
    diag = dict(sca.diagnostics)
    diag["validity"] = validate_geometry(geom, None).codes
    diag["active_region_fraction"] = 0.0
    return _compose(geom, sca.q_sca, 0.0, diag)


@dataclass
class SweepRow:
    range_m: float
    x_o_m: float | None
    result: ChannelResult | None
    error: str | None = None


def sweep_range(geom: SystemGeometry, atm: Atmosphere, surface: ReflectionSurface | None,
                ranges: Sequence[float], quad: QuadratureSpec = QuadratureSpec(),
                obstacle_rule: Callable[[float], ObstacleBox | None] = range_scaled_obstacle,
                **kwargs) -> list[SweepRow]:
    """One channel evaluation per range, with the obstacle rebuilt for each range.

    The default rule scales the obstacle with the range (thickness r/10, width and
    height 2r, centred at (-3s/2, r/2)).  A failing point is recorded and skipped.
    """
    rows = []
    for r in ranges:
        try:
            g = geom.replace(range_r=float(r))
            obs = obstacle_rule(float(r))
            res = total_energy(g, atm, obs, surface, quad, **kwargs)
            rows.append(SweepRow(float(r), obs.center_x if obs else None, res))
        except (UvnlosError, ValueError) as exc:
            rows.append(SweepRow(float(r), None, None, str(exc)))
    return rows


def sweep_offset(geom: SystemGeometry, atm: Atmosphere, obstacle: ObstacleBox,
                 surface: ReflectionSurface, offsets: Sequence[float],
                 quad: QuadratureSpec = QuadratureSpec(), **kwargs) -> list[SweepRow]:
    """Scattered and reflected path loss as the obstacle centre x_o moves."""
    rows = []
    for x_o in offsets:
        try:
            obs = obstacle.replace(center_x=float(x_o))
            res = total_energy(geom, atm, obs, surface, quad, **kwargs)
            rows.append(SweepRow(geom.range_r, float(x_o), res))
        except (UvnlosError, ValueError) as exc:
            rows.append(SweepRow(geom.range_r, float(x_o), None, str(exc)))
    return rows
