"""Figure renderer for simulator run directories."""

from .render import (KINDS, ArtifactError, PlotSpec, render, render_jadpp,
                     render_paths, render_power)

__all__ = ["KINDS", "ArtifactError", "PlotSpec", "render", "render_jadpp",
           "render_paths", "render_power"]

__version__ = "0.1.0"
