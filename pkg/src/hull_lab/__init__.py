"""Numerical checks of convex hull properties for planar vector fields."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .fields import FieldExpr  # noqa: E402
from .geometry import PointSet, contains, convex_hull_2d, hull_distance, separate  # noqa: E402
from .grid import GridDomain, build_grid, collar  # noqa: E402
from .hull_property import (  # noqa: E402
    QuasiConvexProbe,
    check_hull_like_property,
    check_hull_property,
)
from .dichotomy import build_certificate, lambda_tilde, verify_supported  # noqa: E402
from .singularity import (  # noqa: E402
    bifurcation_scan,
    det_quadratic,
    preimage_count,
    remark1_case,
    singular_sweep,
)
from .monge_ampere import MAProblem, solve_ma, verify_theorem5  # noqa: E402
from .transport import check_max_principle, counterexample_probe, make_instance  # noqa: E402
