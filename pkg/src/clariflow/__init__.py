"""clariflow: supervisor/expert dialogue orchestration with user clarification."""

__version__ = "0.1.0"
