"""CSV tables, run manifest and a matplotlib plot script for each scenario run."""

from __future__ import annotations

import csv
import os
from importlib import metadata
from pathlib import Path

from ..errors import QcnError
from . import config as cfgmod
from .scenarios import ScenarioResult, SweepTable


class OutputError(QcnError, OSError):
    category = "output"


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from .. import __version__

        return __version__


def _cell(value) -> str:
    if value is None:
        return ""
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        # repr is the shortest round-tripping form, so reruns compare bit-for-bit
        return repr(value)
    return str(value)


def write_csv(path: Path, table: SweepTable):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_cell(v) for v in row])


_PLOTS = {
    "fig2": """\
grid = pd.read_csv(here / "fig2.csv")
cuts = pd.read_csv(here / "fig2_cuts.csv")
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
piv = grid.pivot(index="beta2_over_kappa", columns="alpha2_over_kappa", values="Ta_numeric")
m = ax1.pcolormesh(piv.columns, piv.index, piv.values, shading="nearest", vmin=0, vmax=1)
ax1.set(xscale="log", yscale="log", xlabel="|alpha|^2/kappa", ylabel="|beta|^2/kappa", title="T_a")
fig.colorbar(m, ax=ax1)
for b, g in cuts.groupby("beta2_over_kappa"):
    line, = ax2.plot(g.alpha2_over_kappa, g.Ta_numeric, "o", label=f"|beta|^2/kappa = {b:g}")
    ax2.plot(g.alpha2_over_kappa, g.Ta_analytic, "-", color=line.get_color())
ax2.set(xscale="log", xlabel="|alpha|^2/kappa", ylabel="T_a")
ax2.legend(fontsize=7)
""",
    "sweep2d": """\
grid = pd.read_csv(here / "sweep2d.csv")
fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for ax, col in zip(axes, ("Ta_numeric", "sigma22_numeric")):
    piv = grid.pivot(index="beta2_over_kappa", columns="alpha2_over_kappa", values=col)
    m = ax.pcolormesh(piv.columns, piv.index, piv.values, shading="nearest")
    ax.set(xscale="log", yscale="log", xlabel="|alpha|^2/kappa", ylabel="|beta|^2/kappa", title=col)
    fig.colorbar(m, ax=ax)
""",
    "fig3": """\
d = pd.read_csv(here / "fig3.csv")
d = d[d.beta2_over_kappa > 0]
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for col in ("sigma22", "sigma33"):
    line, = ax1.plot(d.beta2_over_kappa, d[col + "_numeric"], "o", label=col)
    ax1.plot(d.beta2_over_kappa, d[col + "_analytic"], "-", color=line.get_color())
ax1.set(xscale="log", xlabel="|beta|^2/kappa", ylabel="population")
ax1.legend()
ax2.plot(d.beta2_over_kappa, d.Ta_numeric, "o")
ax2.plot(d.beta2_over_kappa, d.Ta_analytic, "-")
ax2.set(xscale="log", xlabel="|beta|^2/kappa", ylabel="T_a")
""",
    "fig4": """\
d = pd.read_csv(here / "{name}.csv")
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for n, g in d.groupby("n_s"):
    ax1.plot(g.t_over_kappa_inv, g.probe_out_flux / g.probe_in_flux, label=f"n_s = {{n}}")
    if n > 0:
        ax2.plot(g.t_over_kappa_inv, g.signal_in_flux, "--", label=f"in, n_s = {{n}}")
        ax2.plot(g.t_over_kappa_inv, g.signal_out_flux, label=f"out, n_s = {{n}}")
ax1.set(xlabel="t kappa", ylabel="probe transmission")
ax2.set(xlabel="t kappa", ylabel="signal flux")
ax1.legend()
ax2.legend(fontsize=7)
""",
}


def plot_script(scenario: str) -> str | None:
    if scenario == "steady":
        return None
    key = "fig4" if scenario == "preset_rb87" else scenario
    body = _PLOTS[key].replace("{name}", scenario).replace("{{", "{").replace("}}", "}")
    return ("# Plot the CSV tables written next to this file (needs pandas and matplotlib).\n"
            "from pathlib import Path\n\nimport matplotlib.pyplot as plt\nimport pandas as pd\n\n"
            "here = Path(__file__).resolve().parent\n"
            f"{body}fig.tight_layout()\nfig.savefig(here / \"{scenario}.png\", dpi=150)\n")


def emit_outputs(result: ScenarioResult, output_dir) -> dict[str, Path]:
    """Write every table, ``manifest.ini`` and (for figures) a plot script."""
    if not result.tables:
        raise OutputError("nothing to write: result has no tables")
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"{out} is not writable")
        written = {}
        for table in result.tables:
            path = out / f"{table.name}.csv"
            write_csv(path, table)
            written[table.name] = path
        script = plot_script(result.config.scenario)
        if script:
            path = out / f"plot_{result.config.scenario}.py"
            path.write_text(script, encoding="utf-8")
            written["plot"] = path
        report = {"tool": "qcnsim", "version": tool_version(), **result.report}
        manifest = cfgmod.dumps(result.config, {"report": report,
                                                "outputs": {k: p.name for k, p in written.items()}})
        path = out / "manifest.ini"
        path.write_text(manifest, encoding="utf-8")
        written["manifest"] = path
    except OSError as exc:
        raise OutputError(f"cannot write outputs to {out}: {exc}") from exc
    return written
