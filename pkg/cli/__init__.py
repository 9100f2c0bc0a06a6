"""
CLI package for SIMLab.
Command implementations behind the main.py subcommands.
"""

from .commands import (
    COMMANDS, CommandResult, resolve_theta,
    cmd_analyze, cmd_flow, cmd_verify, cmd_sweep, cmd_activations,
    EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_AMBIGUOUS, EXIT_BLEW_UP,
)

__all__ = [
    "COMMANDS", "CommandResult", "resolve_theta",
    "cmd_analyze", "cmd_flow", "cmd_verify", "cmd_sweep", "cmd_activations",
    "EXIT_OK", "EXIT_FAILED", "EXIT_CONFIG", "EXIT_AMBIGUOUS", "EXIT_BLEW_UP",
]
