"""Domain errors for the rescue planner.

Every error carries a stable machine ``code`` and a human ``reason`` so that
the CLI can emit a JSON rejection without string parsing.
"""
from __future__ import annotations

from typing import Any, Optional


class PlannerError(Exception):
    code = "planner_error"
    exit_code = 1

    def __init__(self, reason: str, *, code: Optional[str] = None):
        if code is not None:
            self.code = code
        self.reason = reason
        super().__init__(f"{self.code}: {reason}")

    def to_dict(self) -> dict:
        return {"status": "error", "code": self.code, "message": self.reason}


class PreconditionError(PlannerError, ValueError):
    code = "precondition_failed"


class ScenarioValidationError(PlannerError):
    code = "invalid_scenario"

    def __init__(self, reason: str, *, field_path: str = "", task_id: Optional[int] = None):
        self.field_path = field_path
        self.task_id = task_id
        prefix = f"{field_path}: " if field_path else ""
        super().__init__(prefix + reason)


class PlacementError(PlannerError):
    code = "placement_failed"


class InvalidChromosomeError(PlannerError):
    code = "invalid_chromosome"


class NoPathFound(PlannerError):
    code = "no_path"

    def __init__(self, reason: str, *, iterations: int = 0):
        self.iterations = iterations
        super().__init__(reason)


class LegPlanningError(NoPathFound):
    code = "leg_failed"

    def __init__(self, vehicle_id: int, leg_index: int, origin: Any, target: Any, cause: NoPathFound):
        self.vehicle_id = vehicle_id
        self.leg_index = leg_index
        self.origin = origin
        self.target = target
        super().__init__(
            f"vehicle {vehicle_id} leg {leg_index} ({origin} -> {target}): {cause.reason}",
            iterations=cause.iterations,
        )


class PipelineError(PlannerError):
    code = "pipeline_failed"

    def __init__(self, reason: str, *, arm: str = "", vehicle_id: Optional[int] = None, leg_index: Optional[int] = None):
        self.arm = arm
        self.vehicle_id = vehicle_id
        self.leg_index = leg_index
        super().__init__(f"[{arm}] {reason}" if arm else reason)
