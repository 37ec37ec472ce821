"""
Taperlink Orchestrator

Runs pipeline stages in dependency order. All stages whose dependencies
have completed are launched together; outputs of dependencies flow into the
inputs of their dependents, optionally renamed through an input mapping.
"""

import asyncio
import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional

from taperlink.base_stage import BaseStage, StageResult, StageStatus

logger = logging.getLogger(__name__)


class WorkflowStatus(Enum):
    """Status of a workflow run"""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class StageTask:
    """A stage placed in the workflow"""
    stage: BaseStage
    stage_id: str
    dependencies: List[str]
    input_mapping: Dict[str, str]  # dependency output key -> this stage's input key


class WorkflowError(ValueError):
    """Malformed workflow: unknown stage, missing dependency or cycle"""


class Orchestrator:
    """
    Dependency-ordered runner for BaseStage instances.

    Usage:
        orch = Orchestrator()
        orch.register_stage(DispersionStage(config))
        orch.register_stage(TaperDesignStage(config))
        orch.add_task("dispersion")
        orch.add_task("taper", dependencies=["dispersion"])
        outcome = await orch.execute()
    """

    def __init__(self):
        self.stages: Dict[str, BaseStage] = {}
        self.workflow: List[StageTask] = []
        self.status = WorkflowStatus.PENDING
        self.results: Dict[str, StageResult] = {}
        self.execution_log: List[Dict[str, Any]] = []

    def register_stage(self, stage: BaseStage) -> None:
        """Make a stage available to add_task"""
        self.stages[stage.stage_id] = stage

    def add_task(
        self,
        stage_id: str,
        dependencies: Optional[List[str]] = None,
        input_mapping: Optional[Dict[str, str]] = None,
    ) -> None:
        """
        Add a registered stage to the workflow.

        Args:
            stage_id: ID of the stage to run
            dependencies: Stage IDs that must complete first
            input_mapping: Renames dependency outputs; when given, only the
                mapped keys are passed on
        """
        if stage_id not in self.stages:
            raise WorkflowError(f"Stage {stage_id} not registered")
        if any(t.stage_id == stage_id for t in self.workflow):
            raise WorkflowError(f"Stage {stage_id} already in the workflow")
        self.workflow.append(StageTask(
            stage=self.stages[stage_id],
            stage_id=stage_id,
            dependencies=list(dependencies or []),
            input_mapping=dict(input_mapping or {}),
        ))

    def _build_input_data(self, task: StageTask, initial: Dict[str, Any]) -> Dict[str, Any]:
        input_data = dict(initial)
        for dep_id in task.dependencies:
            data = self.results[dep_id].data or {}
            if task.input_mapping:
                for output_key, input_key in task.input_mapping.items():
                    if output_key in data:
                        input_data[input_key] = data[output_key]
            else:
                input_data.update(data)
        return input_data

    def _validate_workflow(self) -> None:
        ids = {task.stage_id for task in self.workflow}
        for task in self.workflow:
            for dep_id in task.dependencies:
                if dep_id not in ids:
                    raise WorkflowError(f"Dependency {dep_id} of {task.stage_id} not found in workflow")
        self._layers()

    def _layers(self) -> List[List[str]]:
        """Kahn's algorithm, grouping stages that can run together"""
        in_degree = {task.stage_id: len(task.dependencies) for task in self.workflow}
        dependents: Dict[str, List[str]] = {task.stage_id: [] for task in self.workflow}
        for task in self.workflow:
            for dep_id in task.dependencies:
                dependents[dep_id].append(task.stage_id)

        layers = []
        ready = [sid for sid, degree in in_degree.items() if degree == 0]
        done = 0
        while ready:
            layers.append(ready)
            done += len(ready)
            following = []
            for sid in ready:
                for dependent in dependents[sid]:
                    in_degree[dependent] -= 1
                    if in_degree[dependent] == 0:
                        following.append(dependent)
            ready = following
        if done != len(self.workflow):
            raise WorkflowError("Workflow has circular dependencies")
        return layers

    async def execute(self, initial_input: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Run the workflow.

        Args:
            initial_input: Data made available to every stage

        Returns:
            {"status", "results", "execution_log"} plus "failed_at" and
            "error" when a stage fails
        """
        try:
            self._validate_workflow()
        except WorkflowError:
            self.status = WorkflowStatus.FAILED
            raise

        self.status = WorkflowStatus.RUNNING
        self.results = {}
        self.execution_log = []
        initial = dict(initial_input or {})
        tasks = {task.stage_id: task for task in self.workflow}

        for layer in self._layers():
            inputs = {sid: self._build_input_data(tasks[sid], initial) for sid in layer}
            for sid in layer:
                self._log_execution(sid, "starting")
            outcomes = await asyncio.gather(*(tasks[sid].stage.process(inputs[sid]) for sid in layer))

            failed = None
            for sid, result in zip(layer, outcomes):
                self.results[sid] = result
                self._log_execution(sid, "completed" if result.success else "failed", result.error)
                if not result.success and failed is None:
                    failed = sid
            if failed is not None:
                self.status = WorkflowStatus.FAILED
                logger.warning("workflow stopped at %s: %s", failed, self.results[failed].error)
                return {
                    "status": "failed",
                    "failed_at": failed,
                    "error": self.results[failed].error,
                    "results": self.results,
                    "execution_log": self.execution_log,
                }

        self.status = WorkflowStatus.COMPLETED
        return {
            "status": "completed",
            "results": self.results,
            "execution_log": self.execution_log,
        }

    def _log_execution(self, stage_id: str, event: str, detail: Any = None) -> None:
        self.execution_log.append({
            "stage_id": stage_id,
            "event": event,
            "detail": detail,
            "timestamp": time.monotonic(),
        })

    def get_status(self) -> WorkflowStatus:
        return self.status

    def reset(self) -> None:
        """Return to the pending state and mark every stage idle"""
        self.status = WorkflowStatus.PENDING
        self.results = {}
        self.execution_log = []
        for stage in self.stages.values():
            stage.status = StageStatus.IDLE
