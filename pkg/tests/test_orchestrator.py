"""
Tests for the workflow orchestrator
"""

import pytest

from config.settings import bundled, load_config
from orchestrator import Orchestrator, WorkflowError, WorkflowStatus
from taperlink.base_stage import FunctionStage, StageStatus
from taperlink.budget import Measured
from taperlink.stages import BudgetStage


def constant(stage_id, **outputs):
    return FunctionStage(stage_id, lambda data: dict(outputs))


class TestOrchestrator:
    """Test suite for Orchestrator"""

    @pytest.fixture
    def orchestrator(self):
        return Orchestrator()

    def test_initialization(self, orchestrator):
        """Test that the orchestrator starts pending and empty"""
        assert orchestrator.get_status() == WorkflowStatus.PENDING
        assert orchestrator.workflow == []

    def test_add_unregistered(self, orchestrator):
        """Test that only registered stages can be scheduled"""
        with pytest.raises(WorkflowError):
            orchestrator.add_task("missing")

    def test_add_twice(self, orchestrator):
        """Test that a stage appears once per workflow"""
        orchestrator.register_stage(constant("a"))
        orchestrator.add_task("a")
        with pytest.raises(WorkflowError):
            orchestrator.add_task("a")

    def test_layers(self, orchestrator):
        """Test that independent stages share a layer"""
        for sid in "abcd":
            orchestrator.register_stage(constant(sid))
        orchestrator.add_task("a")
        orchestrator.add_task("b")
        orchestrator.add_task("c", dependencies=["a", "b"])
        orchestrator.add_task("d", dependencies=["c"])
        assert orchestrator._layers() == [["a", "b"], ["c"], ["d"]]

    @pytest.mark.asyncio
    async def test_data_flow(self, orchestrator):
        """Test that dependency outputs reach their dependents"""
        orchestrator.register_stage(constant("source", x=3))
        orchestrator.register_stage(FunctionStage("square", lambda d: {"y": d["x"] ** 2}, required=["x"]))
        orchestrator.add_task("source")
        orchestrator.add_task("square", dependencies=["source"])
        outcome = await orchestrator.execute()
        assert outcome["status"] == "completed"
        assert outcome["results"]["square"].data == {"y": 9}
        assert orchestrator.get_status() == WorkflowStatus.COMPLETED

    @pytest.mark.asyncio
    async def test_input_mapping(self, orchestrator):
        """Test renaming dependency outputs"""
        orchestrator.register_stage(constant("source", value=4, noise=1))
        orchestrator.register_stage(FunctionStage("echo", lambda d: dict(d), required=["x"]))
        orchestrator.add_task("source")
        orchestrator.add_task("echo", dependencies=["source"], input_mapping={"value": "x"})
        outcome = await orchestrator.execute({"seed": 7})
        assert outcome["results"]["echo"].data == {"seed": 7, "x": 4}

    @pytest.mark.asyncio
    async def test_failure_stops_workflow(self, orchestrator):
        """Test that a failed stage stops its dependents"""
        def fail(data):
            raise RuntimeError("solver exploded")
        orchestrator.register_stage(FunctionStage("fail", fail))
        orchestrator.register_stage(constant("after"))
        orchestrator.add_task("fail")
        orchestrator.add_task("after", dependencies=["fail"])
        outcome = await orchestrator.execute()
        assert outcome["status"] == "failed"
        assert outcome["failed_at"] == "fail"
        assert outcome["error"] == "solver exploded"
        assert "after" not in outcome["results"]
        assert orchestrator.get_status() == WorkflowStatus.FAILED

    @pytest.mark.asyncio
    async def test_missing_dependency(self, orchestrator):
        """Test that dependencies must be in the workflow"""
        orchestrator.register_stage(constant("a"))
        orchestrator.add_task("a", dependencies=["ghost"])
        with pytest.raises(WorkflowError):
            await orchestrator.execute()
        assert orchestrator.get_status() == WorkflowStatus.FAILED

    @pytest.mark.asyncio
    async def test_cycle(self, orchestrator):
        """Test that circular dependencies are rejected"""
        orchestrator.register_stage(constant("a"))
        orchestrator.register_stage(constant("b"))
        orchestrator.add_task("a", dependencies=["b"])
        orchestrator.add_task("b", dependencies=["a"])
        with pytest.raises(WorkflowError, match="circular"):
            await orchestrator.execute()

    @pytest.mark.asyncio
    async def test_execution_log_and_reset(self, orchestrator):
        """Test the log entries and returning to pending"""
        orchestrator.register_stage(constant("a", x=1))
        orchestrator.add_task("a")
        outcome = await orchestrator.execute()
        events = [(e["stage_id"], e["event"]) for e in outcome["execution_log"]]
        assert events == [("a", "starting"), ("a", "completed")]
        orchestrator.reset()
        assert orchestrator.get_status() == WorkflowStatus.PENDING
        assert orchestrator.results == {}
        assert orchestrator.stages["a"].get_status() == StageStatus.IDLE

    @pytest.mark.asyncio
    async def test_budget_workflow(self, orchestrator):
        """Test a stage chain feeding a fitted g2(0) into the budget"""
        orchestrator.register_stage(constant("g2", fitted=Measured(0.38, 0.05)))
        orchestrator.register_stage(BudgetStage(load_config(bundled("nwg_budget"))))
        orchestrator.add_task("g2")
        orchestrator.add_task("budget", dependencies=["g2"], input_mapping={"fitted": "g2_zero"})
        outcome = await orchestrator.execute()
        assert outcome["status"] == "completed"
        report = outcome["results"]["budget"].data["report"]
        assert report.value("Source efficiency").value == pytest.approx(0.1539, abs=5e-4)
