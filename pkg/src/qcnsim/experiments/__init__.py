"""Configuration, truncation control, scenario runners, outputs and the command line."""

from .config import RunConfig, Sweep, Timing, Truncation, dumps, load, loads
from .convergence import TruncationReport, ladder
from .outputs import emit_outputs
from .scenarios import (
    ScenarioResult,
    SweepTable,
    converge_truncation,
    default_config,
    rb87_params,
    run,
    run_fig2,
    run_fig3,
    run_fig4,
    run_preset_rb87,
    run_steady,
    run_sweep2d,
)
