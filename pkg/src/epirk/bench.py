"""Experiment runners, CSV rows and the flat config format used by the CLI."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .integrators import (
    ControllerConfig,
    IntegrationError,
    RTOL_FLOOR,
    KrylovProjected,
    default_mode,
    integrate_adaptive,
    integrate_fixed,
    mode_label,
    parse_mode,
)
from .methods import METHODS, get_method
from .problems import PROBLEMS, RESERVED, get_problem, high_accuracy_reference, reference_solve

__all__ = [
    "CSV_FIELDS",
    "CsvRow",
    "MethodSpec",
    "ExperimentConfig",
    "ConfigError",
    "parse_method_spec",
    "parse_config",
    "config_from_comments",
    "estimate_order",
    "relative_error",
    "run_convergence",
    "run_workprecision",
    "write_csv",
    "read_csv",
    "DEFAULT_RTOLS",
]

DEFAULT_RTOLS = tuple(10.0**-k for k in range(1, 9))


class ConfigError(ValueError):
    """Bad experiment description (unknown names, malformed values)."""


@dataclass
class CsvRow:
    method: str
    mode: str
    m: int
    problem: str
    h_or_rtol: float
    error: float
    steps_accepted: int
    steps_rejected: int
    krylov_rms: float
    cpu_seconds: float
    status: str = "ok"


CSV_FIELDS = tuple(f.name for f in fields(CsvRow))
_FLOAT_FIELDS = ("h_or_rtol", "error", "krylov_rms", "cpu_seconds")
_INT_FIELDS = ("m", "steps_accepted", "steps_rejected")


@dataclass(frozen=True)
class MethodSpec:
    name: str
    mode: str  # canonical mode label

    @property
    def label(self) -> str:
        return f"{self.name}@{self.mode}"

    def tableau(self):
        return get_method(self.name)

    def jac_mode(self):
        return parse_mode(self.mode)


def parse_method_spec(text: str, default_mode_text: str | None = None) -> MethodSpec:
    """``NAME`` or ``NAME@MODE``; the mode falls back to the method default."""
    name, _, mode = text.strip().partition("@")
    if name not in METHODS:
        raise ConfigError(f"unknown method {name!r}; known: {', '.join(METHODS)}")
    mode = mode or default_mode_text
    try:
        jm = parse_mode(mode) if mode else default_mode(get_method(name))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return MethodSpec(name, mode_label(jm))


@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment.

    The config file is flat ``key = value`` lines; each ``[method]`` line
    opens a block whose ``name`` and ``mode`` keys add one method.
    """

    experiment: str = "workprecision"
    problem: str = "lorenz96"
    methods: list = field(default_factory=list)
    tspan: Optional[tuple] = None
    h0: float = 0.01
    halvings: int = 5
    rtols: tuple = DEFAULT_RTOLS
    atol: Optional[float] = None  # None means atol = rtol
    out: Optional[str] = None
    seed: int = 0
    serial: bool = True

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in ("convergence", "workprecision"):
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.problem in RESERVED:
            raise ConfigError(f"problem {self.problem!r} is not implemented")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; known: {', '.join(PROBLEMS)}")
        if not self.methods:
            raise ConfigError("no methods given")
        if self.h0 <= 0 or self.halvings < 0:
            raise ConfigError("need h0 > 0 and halvings >= 0")
        if not self.rtols or min(self.rtols) < RTOL_FLOOR:
            raise ConfigError(f"rtol values must be at least {RTOL_FLOOR:.3g}")
        if self.atol is not None and self.atol < 0:
            raise ConfigError("atol must be non-negative")
        if self.tspan is not None and not self.tspan[1] > self.tspan[0]:
            raise ConfigError("tspan must satisfy a < b")
        return self

    def echo(self) -> list[str]:
        """Config as lines that ``parse_config`` reads back to the same experiment."""
        lines = [
            f"experiment = {self.experiment}",
            f"problem = {self.problem}",
            f"h0 = {self.h0!r}",
            f"halvings = {self.halvings}",
            "rtol = " + ", ".join(repr(float(r)) for r in self.rtols),
            f"atol = {'rtol' if self.atol is None else repr(float(self.atol))}",
            f"seed = {self.seed}",
            f"serial = {str(self.serial).lower()}",
        ]
        if self.tspan is not None:
            lines.append(f"tspan = {self.tspan[0]!r}:{self.tspan[1]!r}")
        for spec in self.methods:
            lines += ["[method]", f"name = {spec.name}", f"mode = {spec.mode}"]
        return lines


def _parse_tspan(text: str) -> tuple:
    a, sep, b = text.partition(":")
    if not sep:
        raise ConfigError(f"tspan must look like a:b, got {text!r}")
    try:
        return float(a), float(b)
    except ValueError:
        raise ConfigError(f"bad tspan {text!r}") from None


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"bad boolean {text!r}")


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    block = None
    specs = []

    def close():
        if block is not None:
            if "name" not in block:
                raise ConfigError("[method] block without a name")
            specs.append(parse_method_spec(block["name"], block.get("mode")))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[method]":
            close()
            block = {}
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = key.strip().lower(), value.strip()
        if block is not None:
            if key in ("name", "mode"):
                block[key] = value
                continue
            # any other key ends the block
            close()
            block = None
        try:
            if key == "experiment":
                cfg.experiment = value
            elif key == "problem":
                cfg.problem = value
            elif key == "method":
                specs.append(parse_method_spec(value))
            elif key == "h0":
                cfg.h0 = float(value)
            elif key == "halvings":
                cfg.halvings = int(value)
            elif key == "rtol":
                cfg.rtols = tuple(float(v) for v in value.replace(",", " ").split())
            elif key == "atol":
                cfg.atol = None if value.lower() == "rtol" else float(value)
            elif key == "tspan":
                cfg.tspan = _parse_tspan(value)
            elif key == "seed":
                cfg.seed = int(value)
            elif key == "serial":
                cfg.serial = _parse_bool(value)
            elif key == "out":
                cfg.out = value
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
    close()
    cfg.methods = specs
    return cfg.validate()


def config_from_comments(comments) -> ExperimentConfig:
    """Rebuild the experiment from the comment header of a CSV written by the CLI."""
    return parse_config("\n".join(c for c in comments if not c.startswith("result ")))


# analysis ---------------------------------------------------------------


def estimate_order(hs, errors) -> float:
    """Least-squares slope of log2(error) against log2(h) over finite, positive points."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if hs.shape != errors.shape:
        raise ValueError("hs and errors differ in length")
    keep = np.isfinite(hs) & np.isfinite(errors) & (hs > 0) & (errors > 0)
    if keep.sum() < 3:
        raise ValueError(f"need at least 3 finite points to fit an order, got {int(keep.sum())}")
    slope, _ = np.polyfit(np.log2(hs[keep]), np.log2(errors[keep]), 1)
    return float(slope)


def relative_error(y, ref) -> float:
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        return math.inf
    return float(np.linalg.norm(y - ref) / np.linalg.norm(ref))


def _krylov_m(spec: MethodSpec) -> int:
    jm = spec.jac_mode()
    return jm.m if isinstance(jm, KrylovProjected) else 0


def _problem_and_span(cfg: ExperimentConfig):
    prob = get_problem(cfg.problem)
    t0, tf = cfg.tspan if cfg.tspan is not None else prob.tspan
    return prob, float(t0), float(tf)


def _failed_row(spec, prob, x, status) -> CsvRow:
    return CsvRow(spec.name, spec.mode, _krylov_m(spec), prob.name, x, math.inf, 0, 0, 0.0, 0.0, status)


def _row(spec, prob, x, res, ref) -> CsvRow:
    err = relative_error(res.y, ref)
    s = res.stats
    status = "ok" if math.isfinite(err) else "diverged"
    return CsvRow(spec.name, spec.mode, _krylov_m(spec), prob.name, x, err, s.accepted, s.rejected,
                  s.krylov_rms, s.cpu_seconds, status)


def _run_cells(cells, serial: bool):
    if serial or len(cells) <= 1:
        return [c() for c in cells]
    workers = min(len(cells), os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: c(), cells))


def run_convergence(cfg: ExperimentConfig, ref=None, log=None) -> list[CsvRow]:
    """Fixed steps h0 / 2^i, i = 0..halvings, for every method in the config."""
    prob, t0, tf = _problem_and_span(cfg)
    if ref is None:
        ref = high_accuracy_reference(prob, prob.y0, t0, tf)
    hs = [cfg.h0 / 2**i for i in range(cfg.halvings + 1)]

    def cell(spec, h):
        def go():
            try:
                res = integrate_fixed(prob, prob.y0, t0, tf, h, spec.tableau(), spec.jac_mode())
            except (IntegrationError, ArithmeticError) as exc:
                _log(log, f"{spec.label} h={h:g}: {exc}")
                return _failed_row(spec, prob, h, "failed")
            return _row(spec, prob, h, res, ref)

        return go

    return _run_cells([cell(s, h) for s in cfg.methods for h in hs], cfg.serial)


def run_workprecision(cfg: ExperimentConfig, ref=None, log=None) -> list[CsvRow]:
    """One adaptive run per (method, rtol); failures become rows with a status."""
    prob, t0, tf = _problem_and_span(cfg)
    if ref is None:
        ref = reference_solve(prob, prob.y0, t0, tf)

    def cell(spec, rtol):
        def go():
            atol = rtol if cfg.atol is None else cfg.atol
            try:
                res = integrate_adaptive(prob, prob.y0, t0, tf, spec.tableau(), spec.jac_mode(),
                                         ControllerConfig(atol=atol, rtol=rtol))
            except (IntegrationError, ArithmeticError) as exc:
                _log(log, f"{spec.label} rtol={rtol:g}: {exc}")
                return _failed_row(spec, prob, rtol, "failed")
            return _row(spec, prob, rtol, res, ref)

        return go

    return _run_cells([cell(s, r) for s in cfg.methods for r in cfg.rtols], cfg.serial)


def _log(log, msg):
    if log is not None:
        print(msg, file=log)


# CSV --------------------------------------------------------------------


def _fmt(name, value):
    if name in _FLOAT_FIELDS:
        return "%.17g" % value
    return str(value)


def write_csv(rows, dest=None, comments=()) -> str:
    """Write rows (and '#' comment lines first) to a path or stream; returns the text."""
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow([_fmt(k, getattr(r, k)) for k in CSV_FIELDS])
    text = buf.getvalue()
    if dest is None:
        return text
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", newline="") as fh:
            fh.write(text)
    return text


def read_csv(source) -> tuple[list[CsvRow], list[str]]:
    """Parse a file written by ``write_csv``; returns (rows, comment lines)."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    lines = text.splitlines()
    comments = [ln[2:] if ln.startswith("# ") else ln[1:] for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    reader = csv.reader(body)
    header = next(reader, None)
    if header is None or tuple(header) != CSV_FIELDS:
        raise ValueError(f"unexpected CSV header {header}")
    rows = []
    for rec in reader:
        d = dict(zip(header, rec))
        for k in _FLOAT_FIELDS:
            d[k] = float(d[k])
        for k in _INT_FIELDS:
            d[k] = int(d[k])
        rows.append(CsvRow(**d))
    return rows, comments

