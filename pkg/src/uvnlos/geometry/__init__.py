"""Scene geometry, rotating-plane frames and blockage tests."""
from .blockage import (
    boundary_margin,
    g_wei_oracle,
    g_wei_paper,
    g_wei_paper_points,
    paper_rule,
    receiver_shadow,
    segment_hits_box,
    transmitter_entry,
)
from .frames import (
    BlockageClassification,
    RxPlaneFrame,
    TxPlaneFrame,
    classify,
    rx_plane_frame,
    tx_plane_frame,
)
from .scene import (
    ObstacleBox,
    Ray,
    ScatterSample,
    SystemGeometry,
    TauInterval,
    TauKind,
    ValidityReport,
    boundary_rays,
    corner_angle_limits,
    jacobian,
    obstacle_corners,
    range_scaled_obstacle,
    receiver_cone_residual,
    scatter_point,
    tau_interval,
    validate_geometry,
    varpi_bounds,
)

__all__ = [name for name in dir() if not name.startswith("_")]
