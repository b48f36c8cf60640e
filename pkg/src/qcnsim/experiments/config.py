"""Run configuration: flat ``key = value`` text with ``[section]`` headers.

Sections: ``[run]``, ``[params]``, ``[cascade]``, ``[truncation]`` and
``[sweep]``. Every field has a default, so an empty file is a valid
configuration. Manifests written after a run use the same format (plus a
``[report]`` section that is ignored on load).
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ..errors import ConfigError, ParameterError
from ..model import CascadeSpec, QcnParams

SCENARIOS = ("steady", "sweep2d", "fig2", "fig3", "fig4", "preset_rb87")
BOSONIC = ("n_a", "n_b", "n_d1", "n_d2")


@dataclass(frozen=True)
class Truncation:
    mode: str = "auto"
    n_a: int = 3
    n_b: int = 3
    n_d1: int | None = None
    n_d2: int | None = None
    tolerance: float = 1e-3
    max_dim: int = 1500
    start: int = 1
    displace: bool = True

    def __post_init__(self):
        if self.mode not in ("auto", "fixed"):
            raise ConfigError(f"truncation mode must be auto or fixed, got {self.mode!r}")
        for name in BOSONIC:
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"truncation {name} must be >= 1")
        if self.mode == "auto" and not self.tolerance > 0:
            raise ConfigError("auto truncation needs a positive tolerance")

    def levels(self) -> dict:
        return {name: getattr(self, name) for name in BOSONIC if getattr(self, name) is not None}


@dataclass(frozen=True)
class Sweep:
    alpha2_min: float = 1e-4
    alpha2_max: float = 1e-1
    alpha2_points: int = 9
    beta2_min: float = 1e-4
    beta2_max: float = 1e-1
    beta2_points: int = 9
    beta2_zero: bool = False
    # fig2 line cuts and the fig3 fixed signal power
    cut_beta2: tuple[float, ...] = (0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)
    cut_alpha2_points: int = 13
    fixed_alpha2: float = 1e-2

    def alpha2_axis(self) -> np.ndarray:
        return np.logspace(math.log10(self.alpha2_min), math.log10(self.alpha2_max), self.alpha2_points)

    def beta2_axis(self) -> np.ndarray:
        axis = np.logspace(math.log10(self.beta2_min), math.log10(self.beta2_max), self.beta2_points)
        return np.concatenate([[0.0], axis]) if self.beta2_zero else axis


@dataclass(frozen=True)
class Timing:
    """Pulse-run time axis, in axis units multiplied by ``time_scale`` to get 1/kappa."""

    n_s: tuple[int, ...] = (0, 1, 2, 3)
    tau_d: float = 150.0
    tau_s: float = 6.0
    t_end: float = 250.0
    dt: float = 0.25
    window_half_widths: float = 5.0
    shape: str = "gaussian"
    kappa_d1_ex2_max: float = 10.0
    probe_mode: str = "classical_drive"
    kappa_d2: float = 1.0
    width_convention: str = "amplitude_fwhm"
    time_scale: float = 1.0

    def __post_init__(self):
        if any(n < 0 for n in self.n_s) or not self.n_s:
            raise ConfigError("cascade n_s needs one or more values >= 0")
        if not (self.dt > 0 and self.t_end > 0 and self.time_scale > 0):
            raise ConfigError("cascade dt, t_end and time_scale must be > 0")
        try:
            self.cascade_spec(0)
        except ParameterError as exc:
            raise ConfigError(f"[cascade]: {exc}") from None

    def cascade_spec(self, n_s: int) -> CascadeSpec:
        s = self.time_scale
        return CascadeSpec(n_s=n_s, kappa_d1_ex2_max=self.kappa_d1_ex2_max, shape=self.shape,
                           tau_d=self.tau_d * s, tau_s=self.tau_s * s, t_window=(0.0, self.t_end * s),
                           probe_mode=self.probe_mode, kappa_d2=self.kappa_d2,
                           width_convention=self.width_convention)

    def grid(self) -> np.ndarray:
        s = self.time_scale
        n = int(round(self.t_end / self.dt))
        return np.linspace(0.0, self.t_end * s, n + 1)

    def probe_window(self) -> tuple[float, float]:
        s = self.time_scale
        w = self.window_half_widths * self.tau_s
        return ((self.tau_d - w) * s, (self.tau_d + w) * s)

    def signal_window(self) -> tuple[float, float]:
        # reflected photons trail the input by the emitter lifetime, so the window runs to the end
        s = self.time_scale
        return ((self.tau_d - self.window_half_widths * self.tau_s) * s, self.t_end * s)


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "steady"
    params: QcnParams = field(default_factory=QcnParams)
    cascade: Timing = field(default_factory=Timing)
    truncation: Truncation = field(default_factory=Truncation)
    sweep: Sweep = field(default_factory=Sweep)
    output_dir: str = "qcn_output"
    rtol: float = 1e-8
    jobs: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if not self.rtol > 0:
            raise ConfigError("rtol must be > 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


def _parse_value(text: str, kind):
    text = text.strip()
    if kind is bool:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is complex:
        return complex(text.replace(" ", ""))
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind == "int|None":
        return None if text.lower() in ("", "none") else int(text)
    if kind == "floats":
        return tuple(float(x) for x in text.split(",") if x.strip())
    if kind == "ints":
        return tuple(int(x) for x in text.split(",") if x.strip())
    return text


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, complex):
        return repr(value).strip("()")
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_format_value(v) for v in value)
    if value is None:
        return "none"
    return str(value)


_KINDS = {
    "params": {"g1": float, "g2": float, "kappa_ex": "floats", "kappa_in_a": float, "kappa_in_b": float,
               "gamma21": float, "gamma31": float, "delta1": float, "delta2": float, "delta_a": float,
               "delta_b": float, "alpha": complex, "beta": complex},
    "cascade": {"n_s": "ints", "tau_d": float, "tau_s": float, "t_end": float, "dt": float,
                "window_half_widths": float, "shape": str, "kappa_d1_ex2_max": float, "probe_mode": str,
                "kappa_d2": float, "width_convention": str, "time_scale": float},
    "truncation": {"mode": str, "n_a": int, "n_b": int, "n_d1": "int|None", "n_d2": "int|None",
                   "tolerance": float, "max_dim": int, "start": int, "displace": bool},
    "sweep": {"alpha2_min": float, "alpha2_max": float, "alpha2_points": int, "beta2_min": float,
              "beta2_max": float, "beta2_points": int, "beta2_zero": bool, "cut_beta2": "floats",
              "cut_alpha2_points": int, "fixed_alpha2": float},
    "run": {"scenario": str, "output_dir": str, "rtol": float, "jobs": int},
}


def _section(parser, name, base):
    if not parser.has_section(name):
        return base
    kinds = _KINDS[name]
    changes = {}
    for key, text in parser.items(name):
        if key not in kinds:
            raise ConfigError(f"unknown key {key!r} in [{name}]")
        try:
            changes[key] = _parse_value(text, kinds[key])
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key}: {exc}") from None
    try:
        return replace(base, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from None


def loads(text: str, base: RunConfig | None = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = base or RunConfig()
    for section in parser.sections():
        if section not in _KINDS and section not in ("report", "outputs"):
            raise ConfigError(f"unknown section [{section}]")
    run = {}
    if parser.has_section("run"):
        for key, text in parser.items("run"):
            if key not in _KINDS["run"]:
                raise ConfigError(f"unknown key {key!r} in [run]")
            try:
                run[key] = _parse_value(text, _KINDS["run"][key])
            except ValueError as exc:
                raise ConfigError(f"[run] {key}: {exc}") from None
    return replace(
        cfg,
        params=_section(parser, "params", cfg.params),
        cascade=_section(parser, "cascade", cfg.cascade),
        truncation=_section(parser, "truncation", cfg.truncation),
        sweep=_section(parser, "sweep", cfg.sweep),
        **run,
    )


def load(path, base: RunConfig | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return loads(fh.read(), base)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def dumps(cfg: RunConfig, extra: dict | None = None) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser["run"] = {"scenario": cfg.scenario, "output_dir": cfg.output_dir,
                     "rtol": _format_value(cfg.rtol), "jobs": str(cfg.jobs)}
    for name, obj in (("params", cfg.params), ("cascade", cfg.cascade),
                      ("truncation", cfg.truncation), ("sweep", cfg.sweep)):
        parser[name] = {f.name: _format_value(getattr(obj, f.name)) for f in fields(obj)}
    for name, items in (extra or {}).items():
        parser[name] = {str(k): _format_value(v) for k, v in items.items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
