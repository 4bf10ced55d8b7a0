"""Batch figure generation for staggered-simulator CSV outputs."""

from .render import (
    MalformedInput,
    load_snapshot,
    render_alpha,
    render_energy,
    render_snapshot,
)

__version__ = "0.1.0"
