"""
Pipeline stage framework

A stage wraps one library operation (a dispersion sweep, a taper synthesis,
a fit, a budget) behind a common asynchronous interface so the orchestrator
can chain them. Stages never raise: failures come back as a StageResult.
"""

import asyncio
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Optional

from config.settings import RunConfig, load_config
from taperlink.errors import TaperlinkError

logger = logging.getLogger(__name__)


class StageStatus(Enum):
    """Lifecycle of a stage"""
    IDLE = "idle"
    RUNNING = "running"
    COMPLETED = "completed"
    ERROR = "error"


@dataclass
class StageResult:
    """Outcome of one stage run"""
    success: bool
    data: Optional[Dict[str, Any]] = None
    error: Optional[str] = None
    metadata: Optional[Dict[str, Any]] = None


class BaseStage(ABC):
    """
    Abstract base class for pipeline stages.

    Subclasses implement `run`, a synchronous computation on validated
    inputs; `process` moves it off the event loop and converts exceptions
    into failed results.
    """

    def __init__(self, stage_id: str, name: str, description: str, config: Optional[RunConfig] = None):
        """
        Args:
            stage_id: Unique identifier inside a workflow
            name: Human-readable name
            description: What the stage computes
            config: Resolved run configuration (defaults if omitted)
        """
        self.stage_id = stage_id
        self.name = name
        self.description = description
        self.config = config or load_config()
        self.status = StageStatus.IDLE

    @abstractmethod
    def run(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        """
        Compute the stage outputs.

        Args:
            input_data: Validated inputs (dependency outputs plus workflow input)

        Returns:
            Output mapping passed on to dependent stages
        """

    @abstractmethod
    def get_required_inputs(self) -> list[str]:
        """Input keys that must be present before `run`"""

    def validate_input(self, input_data: Dict[str, Any]) -> tuple[bool, Optional[str]]:
        """
        Check that every required input is present.

        Returns:
            Tuple of (is_valid, error_message)
        """
        missing = [key for key in self.get_required_inputs() if key not in input_data]
        if missing:
            return False, f"Missing required inputs: {', '.join(missing)}"
        return True, None

    async def process(self, input_data: Dict[str, Any]) -> StageResult:
        """Validate, run in a worker thread, and wrap the outcome"""
        is_valid, error = self.validate_input(input_data)
        if not is_valid:
            self.status = StageStatus.ERROR
            return StageResult(success=False, error=error, metadata={"stage": self.stage_id})

        self.status = StageStatus.RUNNING
        logger.info("stage %s started", self.stage_id)
        try:
            data = await asyncio.to_thread(self.run, input_data)
        except (TaperlinkError, ValueError, ArithmeticError, RuntimeError) as exc:
            self.status = StageStatus.ERROR
            logger.warning("stage %s failed: %s", self.stage_id, exc)
            return StageResult(
                success=False,
                error=str(exc),
                metadata={"stage": self.stage_id, "exception": type(exc).__name__},
            )
        self.status = StageStatus.COMPLETED
        logger.info("stage %s completed", self.stage_id)
        return StageResult(success=True, data=data, metadata={"stage": self.stage_id})

    def get_status(self) -> StageStatus:
        return self.status

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(id={self.stage_id}, name={self.name}, status={self.status.value})"


class FunctionStage(BaseStage):
    """Stage built from a plain callable, for ad-hoc workflows and tests"""

    def __init__(self, stage_id: str, func: Callable[[Dict[str, Any]], Dict[str, Any]],
                 required: Optional[list[str]] = None, config: Optional[RunConfig] = None):
        super().__init__(stage_id, stage_id, func.__doc__ or "", config)
        self._func = func
        self._required = list(required or [])

    def run(self, input_data: Dict[str, Any]) -> Dict[str, Any]:
        return self._func(input_data)

    def get_required_inputs(self) -> list[str]:
        return self._required
