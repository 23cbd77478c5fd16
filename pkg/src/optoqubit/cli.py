"""Command-line scenario runner.

Subcommands ``steady``, ``pert``, ``sweep``, ``strobe``, ``plan`` and
``figure <id>`` write CSV tables plus a ``manifest.txt`` into the output
directory (``--out``, else ``$OPTOQUBIT_OUT``, else ``./out``).

Configs are INI files with one section named after the scenario, e.g.::

    [sweep]
    axis = zeta
    grid = 0.05, 0.1, 0.2
    c_q = 100
    c_m = 100
    targets = A, m
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .dynamics import StroboParams
from .errors import ConfigError, OptoQubitError
from .law_eberly import count_steps, normalize_target, plan_many, plan_to_text, simulate_plan
from .lindblad import AUX_JUMPS, EngineeredConfig
from .scenarios import (
    EngineeredTarget,
    Table,
    engineered_sweep,
    fig1_curves,
    fig2_curves,
    fig3ab_curves,
    fig3c_curves,
    fig4_curves,
    pert_table,
    steady_point,
    strobe_table,
)

OUT_ENV = "OPTOQUBIT_OUT"
KINDS = ("steady", "pert", "sweep", "strobe", "plan")
FIGURES = ("fig1", "fig2", "fig3a", "fig3b", "fig3c", "fig4")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _float(v: str) -> float:
    v = v.strip().lower()
    return math.inf if v in ("inf", "infinity") else float(v)


def _floats(v: str) -> list[float]:
    return [_float(x) for x in v.split(",") if x.strip()]


def _strs(v: str) -> list[str]:
    return [x.strip() for x in v.split(",") if x.strip()]


def _bool(v: str) -> bool:
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


# field name -> (parser, default)
_ENGINEERED = {
    "zeta": (_float, 0.2), "c_q": (_float, 100.0), "c_m": (_float, 100.0), "gamma_aux": (_float, 1.0),
    "fock_dim": (int, 10), "jump": (str, "sp-zbd"), "noise_convention": (str, "shared"),
    "n_oscillators": (int, 1),
}
SCHEMAS: dict[str, dict[str, tuple[Callable, object]]] = {
    "steady": dict(_ENGINEERED),
    "sweep": {**_ENGINEERED, "axis": (str, "zeta"), "grid": (_floats, [0.1, 0.2, 0.3]),
              "targets": (_strs, ["A", "m"]), "check_fock_dim": (int, 0)},
    "pert": {"zeta": (_floats, [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]), "gamma_q": (_floats, [0.0, 0.01, 0.1]),
             "gamma_m": (_floats, [0.0, 0.01, 0.1]), "gamma_aux": (_floats, [0.1]), "fock_dim": (int, 5),
             "full_fock_dim": (int, 10)},
    "strobe": {"detuning": (_float, 1.0), "delta": (_float, 0.0), "omega_on": (_float, 0.0),
               "omega_off": (_float, 8.0), "g_q": (_float, 0.05), "g_m": (_float, 0.05),
               "n_oscillators": (int, 2), "fock_dim": (int, 4), "cavity_dim": (int, 3), "n": (int, 2),
               "tau_scale": (_float, 1.0), "t_end": (_float, 0.0)},
    "plan": {"target": (str, "0,5,0:1; 1,5,10:1; 1,1,1:1"), "normalize": (_bool, True),
             "shifts": (_floats, []), "amplitude_fraction": (_float, 1e-3), "simulate": (_bool, True)},
}


@dataclass
class ScenarioConfig:
    kind: str
    params: dict[str, object] = field(default_factory=dict)
    out: Path = Path("out")
    workers: int = 1

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}", "kind")
        p = self.params
        if "fock_dim" in p and int(p["fock_dim"]) < 4:
            raise ConfigError("truncation must be >= 4", "fock_dim")
        if self.kind in ("steady", "sweep"):
            if not 0 < float(p["zeta"]) <= 1:
                raise ConfigError("must lie in (0, 1]", "zeta")
            if p["jump"] not in AUX_JUMPS:
                raise ConfigError(f"must be one of {sorted(AUX_JUMPS)}", "jump")
            if p["noise_convention"] not in ("shared", "microscopic"):
                raise ConfigError("must be 'shared' or 'microscopic'", "noise_convention")
            for k in ("c_q", "c_m"):
                if float(p[k]) <= 0:
                    raise ConfigError("cooperativity must be positive", k)
            if float(p["gamma_aux"]) < 0:
                raise ConfigError("must be >= 0", "gamma_aux")
        if self.kind == "sweep":
            if not p["grid"]:
                raise ConfigError("grid is empty", "grid")
            for t in p["targets"]:
                if t not in EngineeredTarget.names:
                    raise ConfigError(f"unknown target {t!r}", "targets")
            if p["axis"] not in ("zeta", "c_m", "c_q", "c", "gamma_aux"):
                raise ConfigError("must be one of zeta, c_m, c_q, c, gamma_aux", "axis")
            if p["check_fock_dim"] and int(p["check_fock_dim"]) < 4:
                raise ConfigError("truncation must be >= 4", "check_fock_dim")
        if self.kind == "strobe" and int(p["n"]) < 1:
            raise ConfigError("must be a positive integer", "n")
        if self.workers < 1:
            raise ConfigError("must be >= 1", "workers")


def load_config(kind: str, path: str | None = None, overrides: dict[str, str] | None = None) -> ScenarioConfig:
    """Resolve a scenario config from defaults, an optional INI file and command-line overrides."""
    schema = SCHEMAS[kind]
    raw: dict[str, str] = {}
    if path:
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise ConfigError(f"cannot read {path}", "config")
        if not cp.has_section(kind):
            raise ConfigError(f"missing section [{kind}]", "config")
        raw.update(cp[kind])
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    params = {}
    for name, (parse, default) in schema.items():
        if name in raw:
            try:
                params[name] = parse(raw.pop(name))
            except ValueError as exc:
                raise ConfigError(str(exc), name) from None
        else:
            params[name] = list(default) if isinstance(default, list) else default
    if raw:
        bad = sorted(raw)[0]
        raise ConfigError("unknown key", bad)
    return ScenarioConfig(kind, params)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def write_csv(path: Path, table: Table, header: dict[str, object]) -> Path:
    lines = [f"# optoqubit {__version__}"]
    lines += [f"# {k} = {_fmt_param(v)}" for k, v in header.items()]
    lines.append(",".join(table.columns))
    lines += [",".join(_fmt(x) for x in row) for row in table.rows]
    path.write_text("\n".join(lines) + "\n", newline="\n")
    return path


def _fmt_param(v) -> str:
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt(x) for x in v)
    return _fmt(v)


class Manifest:
    def __init__(self, out: Path, kind: str, params: dict[str, object]):
        self.out = out
        self.lines = [f"optoqubit {__version__}", f"scenario: {kind}"]
        self.lines += [f"param {k} = {_fmt_param(v)}" for k, v in params.items()]
        self.files: list[Path] = []

    def add_output(self, path: Path):
        self.files.append(path)
        self.lines.append(f"output {path.name}")

    def note(self, text: str):
        self.lines.append(text)

    def write(self) -> Path:
        p = self.out / "manifest.txt"
        p.write_text("\n".join(self.lines) + "\n", newline="\n")
        return p


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def _engineered(p: dict) -> EngineeredConfig:
    return EngineeredConfig(zeta=p["zeta"], c_q=p["c_q"], c_m=p["c_m"], gamma_aux=p["gamma_aux"],
                            fock_dim=p["fock_dim"], jump=p["jump"], noise_convention=p["noise_convention"],
                            n_oscillators=p["n_oscillators"])


def _parse_target(text: str, normalize: bool) -> dict:
    items = {}
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        occ, _, amp = chunk.partition(":")
        items[tuple(int(x) for x in occ.split(","))] = complex(amp.strip().replace(" ", "") or "1")
    if normalize:
        norm = math.sqrt(sum(abs(v) ** 2 for v in items.values()))
        items = {k: v / norm for k, v in items.items()}
    return items


def run_scenario(cfg: ScenarioConfig) -> int:
    """Run one scenario; returns the process exit status."""
    cfg.validate()
    cfg.out.mkdir(parents=True, exist_ok=True)
    p = cfg.params
    man = Manifest(cfg.out, cfg.kind, p)
    status = 0
    if cfg.kind == "steady":
        res = steady_point(_engineered(p))
        tab = Table(list(p) + list(res), [list(p.values()) + list(res.values())])
        man.add_output(write_csv(cfg.out / "steady.csv", tab, p))
    elif cfg.kind == "sweep":
        base = _engineered(p)
        sw = engineered_sweep(base, p["axis"], p["grid"], p["targets"], p["check_fock_dim"] or None, cfg.workers)
        man.add_output(write_csv(cfg.out / "sweep.csv", Table.from_sweep(sw), p))
        man.note(f"flagged_fraction {sw.flagged_fraction:.12g}")
        for r in sw.rows:
            if r.error:
                man.note(f"row {r.param_value:.12g} failed: {r.error}")
        if sw.flagged_fraction > 0.5:
            status = 3
    elif cfg.kind == "pert":
        ratios = [(gq, gm, ga) for gq in p["gamma_q"] for gm in p["gamma_m"] for ga in p["gamma_aux"]
                  if gq + gm + ga > 0]
        tab = pert_table(p["zeta"], ratios, p["fock_dim"], p["full_fock_dim"])
        man.add_output(write_csv(cfg.out / "pert.csv", tab, p))
    elif cfg.kind == "strobe":
        sp = StroboParams(p["detuning"], p["delta"], p["omega_on"], p["omega_off"], p["g_q"], p["g_m"],
                          p["n_oscillators"], p["fock_dim"], p["cavity_dim"])
        tab, sched, cmp = strobe_table(sp, p["n"], p["tau_scale"], p["t_end"] or None)
        header = dict(p, tau=sched.tau, omega_on_renormalized=sched.omega_on, omega_off_renormalized=sched.omega_off)
        man.add_output(write_csv(cfg.out / "strobe.csv", tab, header))
        _report(man, cmp.report)
        man.note(f"max_error {cmp.max_error:.12g}")
    elif cfg.kind == "plan":
        target = normalize_target(_parse_target(p["target"], p["normalize"]))
        plan = plan_many(target, p["shifts"] or None, amplitude_fraction=p["amplitude_fraction"])
        path = cfg.out / "plan.txt"
        path.write_text(plan_to_text(plan), newline="\n")
        man.add_output(path)
        man.note(f"coupling_steps {len(plan.coupling_steps)}")
        man.note("steps_per_oscillator " + ",".join(map(str, plan.steps_per_oscillator())))
        man.note(f"count_steps {count_steps(target)}")
        man.note("phases: idle-manifold dynamical phases are absorbed in the interaction frame")
        if p["simulate"]:
            _, fid = simulate_plan(plan)
            man.note(f"simulated_fidelity {fid:.12g}")
    man.write()
    return status


def _report(man: Manifest, rep) -> None:
    names = ["(i) integer period", "(ii) elimination", "(iii) fast switching", "(iv) separation",
             "(v) cooperativity"]
    keys = [("integer_period", "integer_margin"), ("elimination", "elimination_margin"),
            ("fast_switching", "switching_margin"), ("separation", "separation_margin"),
            ("cooperativity", "cooperativity_margin")]
    for n, (b, m) in zip(names, keys):
        man.note(f"condition {n}: {'pass' if getattr(rep, b) else 'fail'} margin {getattr(rep, m):.12g}")


def run_figure(figure_id: str, out: Path, fock_dim: int = 10, workers: int = 1) -> list[Path]:
    """Write the CSV curves of one figure; returns the written paths."""
    if figure_id not in FIGURES:
        raise ConfigError(f"unknown figure id {figure_id!r}; choose from {', '.join(FIGURES)}", "figure")
    out.mkdir(parents=True, exist_ok=True)
    header = dataclasses.asdict(StroboParams()) if figure_id == "fig4" else {"fock_dim": fock_dim}
    man = Manifest(out, f"figure {figure_id}", header)
    reports = {}
    if figure_id == "fig1":
        tables = fig1_curves(fock_dim)
    elif figure_id == "fig2":
        tables = fig2_curves(fock_dim)
    elif figure_id in ("fig3a", "fig3b"):
        tables = fig3ab_curves(fock_dim, workers=workers, inset_fock_dim=30 if figure_id == "fig3a" else 0)
    elif figure_id == "fig3c":
        tables = fig3c_curves(fock_dim)
    else:
        tables, reports = fig4_curves()
    paths = []
    for name, tab in tables.items():
        paths.append(write_csv(out / f"{name}.csv", tab, {"figure": figure_id, "curve": name, **header}))
        man.add_output(paths[-1])
    for name, rep in reports.items():
        man.note(f"[{name}]")
        _report(man, rep)
    man.write()
    return paths


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="optoqubit", description="qubit-assisted optomechanics scenarios")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a section named after the scenario")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    common.add_argument("--workers", type=int, default=1, help="worker processes for sweep grid points")
    common.add_argument("--fock-dim", type=int, help="oscillator truncation")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sub.add_parser(kind, parents=[common], help=f"run a {kind} scenario")
    fig = sub.add_parser("figure", parents=[common], help="regenerate the data of one figure")
    fig.add_argument("figure_id", choices=FIGURES)
    return ap


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or "out")


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    out = _out_dir(args.out)
    try:
        if args.command == "figure":
            run_figure(args.figure_id, out, args.fock_dim or 10, args.workers)
            return 0
        overrides = {}
        for item in args.set:
            k, sep, v = item.partition("=")
            if not sep:
                raise ConfigError("expected KEY=VALUE", item)
            overrides[k.strip()] = v
        if args.fock_dim is not None:
            overrides["fock_dim"] = str(args.fock_dim)
        cfg = load_config(args.command, args.config, overrides)
        cfg = replace(cfg, out=out, workers=args.workers)
        return run_scenario(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OptoQubitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
