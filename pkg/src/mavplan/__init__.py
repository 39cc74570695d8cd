"""Kinodynamic MAV planning: instance maps, ellipsoidal RRT*, iLQR smoothing,
B-spline time laws and a Wait/Gen/Exec mission loop."""

from ._accel import NUMBA_ENABLED
from .dynamics import VehicleParams, linearize, rk4_step, rollout
from .mission import MissionConfig, MissionLog, MissionTimeout, run_mission
from .planners import (AllPlannersFailed, PathCandidate, PathNotFound, PlannerConfig, path_cost, plan_a_star,
                       plan_and_select, plan_rrt_star)
from .search_space import Bounds, Ellipsoid, build_search_space, generate_interior_points
from .smoothing import RiccatiFailure, SmootherConfig, ilqr_segment, smooth_path
from .spatial_map import InstanceMap, MapBuffer, WorldSpec, build_instance_map, random_world
from .trajectory import BSpline, fit_bspline, sample

__version__ = "0.1.0"
