"""Network execution: channels, vertex protocols and the scheduler."""
from .channels import Channel, Link
from .scheduler import (
    BUDGET, DEADLOCK, DEFAULT_CAPACITY, DEFAULT_MAX_STEPS, EXIT_CODES, FAULT, TERMINATED,
    RunResult, Scheduler, run_network,
)

__all__ = [
    "BUDGET", "Channel", "DEADLOCK", "DEFAULT_CAPACITY", "DEFAULT_MAX_STEPS", "EXIT_CODES",
    "FAULT", "Link", "RunResult", "Scheduler", "TERMINATED", "run_network",
]
