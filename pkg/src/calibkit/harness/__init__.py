"""File formats, the evaluation protocol and the command-line interface."""
from .io import load_manifest, load_predictions, write_predictions
from .evaluate import Manifest, run_evaluate
from .plots import emit_plot_data

__all__ = [
    "Manifest",
    "emit_plot_data",
    "load_manifest",
    "load_predictions",
    "run_evaluate",
    "write_predictions",
]
