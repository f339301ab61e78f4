"""Flow- and context-sensitive points-to analysis over procedure summaries."""

from pointsto.ptir import parse_program, Program, PtirError

__all__ = ["parse_program", "Program", "PtirError"]
__version__ = "0.1.0"
