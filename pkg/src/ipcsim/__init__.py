"""Deterministic discrete-event simulator for recursive IPC network stacks."""

from pathlib import Path

__version__ = "0.1.0"

SCENARIO_DIR = Path(__file__).parent / "scenarios"


def shipped_scenarios() -> list[Path]:
    """Scenario files installed with the package, sorted by name."""
    return sorted(SCENARIO_DIR.glob("*.yaml"))
