"""Heterogeneous UAV/UGV rescue mission planning.

Allocate tasks with an enhanced genetic algorithm, refine each vehicle's
visiting order with CMA-ES, and plan collision-free legs with Informed-RRT*.
"""
from .baselines import BaselineKind, kmeans_assign, random_assign, standard_ga
from .cmaes_seq import CmaesParams, decode_keys, improvement_report, optimize_sequence, tour_cost
from .ega_alloc import Assignment, Chromosome, EgaParams, Objective, run_ega
from .env_model import Environment, Obstacle, Point, TaskPoint, point_clearance, segment_collides, straight_line_cost
from .errors import (
    InvalidChromosomeError,
    LegPlanningError,
    NoPathFound,
    PipelineError,
    PlacementError,
    PlannerError,
    PreconditionError,
    ScenarioValidationError,
)
from .fleet_model import Fleet, VehicleKind, VehicleSpec, default_fleet, route_feasible
from .irrt_planner import PlannedPath, RrtParams, plan, plan_route, prune_and_smooth
from .mission_pipeline import MissionPlan, PipelineConfig, compare_allocators, run_pipeline, validate_plan

__version__ = "1.0.0"

__all__ = [
    "Assignment",
    "BaselineKind",
    "Chromosome",
    "CmaesParams",
    "EgaParams",
    "Environment",
    "Fleet",
    "InvalidChromosomeError",
    "LegPlanningError",
    "MissionPlan",
    "NoPathFound",
    "Objective",
    "Obstacle",
    "PipelineConfig",
    "PipelineError",
    "PlacementError",
    "PlannedPath",
    "PlannerError",
    "Point",
    "PreconditionError",
    "RrtParams",
    "ScenarioValidationError",
    "TaskPoint",
    "VehicleKind",
    "VehicleSpec",
    "compare_allocators",
    "decode_keys",
    "default_fleet",
    "improvement_report",
    "kmeans_assign",
    "optimize_sequence",
    "plan",
    "plan_route",
    "point_clearance",
    "prune_and_smooth",
    "random_assign",
    "route_feasible",
    "run_ega",
    "run_pipeline",
    "segment_collides",
    "standard_ga",
    "straight_line_cost",
    "tour_cost",
    "validate_plan",
]
