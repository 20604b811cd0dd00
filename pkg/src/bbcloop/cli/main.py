"""Command-line front end: ``bbcloop <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from ..analysis import (
    HorizonTooShortError,
    MarginRow,
    default_grid,
    format_margin_table,
    frequency_response,
    pole_zero_report,
    stability_margins,
    step_metrics,
    step_response,
    verdict,
)
from ..lti import (
    IndeterminateError,
    format_tf,
    format_zpk,
    second_order_character,
    tf_to_zpk,
    tustin_discretize,
)
from ..poly import PolynomialError
from ..simloop import SimulationDiverged, simulate_closed_loop
from ..systems import Controller, Domain, closed_loop, controller_for, plant_for
from . import emit
from .config import ConfigError, ScenarioConfig, config_from_dict, dump_config, load_config
from .report import format_summary, summary, write_bundle

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_TOLERANCE = 4

COMMANDS = ("model", "step", "bode", "pzmap", "margins", "simulate", "report")


class _Parser(argparse.ArgumentParser):
    # usage errors share the exit code of invalid configuration
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bbcloop", description="Buck-boost converter control-loop characterization.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--mode", choices=("boost", "buck"))
    ap.add_argument("--domain", choices=("analog", "digital"))
    ap.add_argument("--controller", choices=("none", "pid", "pidn"))
    ap.add_argument("--ts", type=float, help="sample time of the digital domain, s")
    ap.add_argument("--feedback-gain", type=float)
    ap.add_argument("--config", type=Path, help="YAML scenario file")
    ap.add_argument("--out", type=Path, help="directory for CSV/SVG artifacts")
    ap.add_argument("--strict", action="store_true", help="report: exit 4 if any gated row is out of tolerance")
    ap.add_argument("--print-config", action="store_true", help="print the resolved scenario and exit")
    ap.add_argument("--provenance", action="store_true", help="with --print-config: list the anchor of every default")
    ap.add_argument("--workers", type=int, default=1, help="report: parallel scenario groups")
    return ap


def _scenario(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    overrides = {}
    for key in ("mode", "domain", "controller"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.ts is not None:
        overrides["sample_time"] = args.ts
    if args.feedback_gain is not None:
        overrides["feedback_gain"] = args.feedback_gain
    if overrides:
        data = cfg.to_dict()
        data.update(overrides)
        if data.get("sim") is not None and "mode" in overrides:
            data["sim"]["mode"] = overrides["mode"]
        cfg = config_from_dict(data)
    return cfg.resolved()


def _system(cfg: ScenarioConfig):
    return closed_loop(
        cfg.mode,
        cfg.domain,
        cfg.controller,
        cfg.feedback_gain,
        cfg.sample_time,
        cfg.gains,
        cfg.plant_source,
        cfg.converter,
    )


def _label(cfg: ScenarioConfig) -> str:
    return f"{cfg.mode.value} {cfg.domain.value} {cfg.controller.value}"


def _stem(cfg: ScenarioConfig) -> str:
    return f"{cfg.domain.value}_{cfg.mode.value}_{cfg.controller.value}"


def _grid(cfg: ScenarioConfig, g):
    if cfg.freq_decades is None:
        return default_grid(g, cfg.points_per_decade)
    lo, hi = cfg.freq_decades
    if g.is_discrete:
        hi = min(hi, math.log10(0.999 * math.pi / g.ts))
    n = int(round((hi - lo) * cfg.points_per_decade)) + 1
    return np.logspace(lo, hi, n)


def cmd_model(cfg: ScenarioConfig, out) -> int:
    plant = plant_for(cfg.mode, cfg.plant_source, cfg.converter)
    if cfg.domain is Domain.DIGITAL:
        plant = tustin_discretize(plant, cfg.sample_time)
    print(f"plant:        {format_tf(plant)}")
    print(f"  zpk:        {format_zpk(tf_to_zpk(plant))}")
    if cfg.controller is Controller.NONE:
        return EXIT_OK
    c = controller_for(cfg.gains)
    if cfg.domain is Domain.DIGITAL:
        c = tustin_discretize(c, cfg.sample_time)
    g = _system(cfg)
    print(f"controller:   {format_tf(c)}")
    print(f"closed loop:  {format_tf(g)}  (feedback gain {cfg.feedback_gain:g})")
    print(f"  zpk:        {format_zpk(tf_to_zpk(g))}")
    if not g.is_discrete:
        ch = second_order_character(g)
        print(f"  dominant:   zeta = {ch.zeta:.4g}, wn = {ch.omega_n:.4g} rad/s ({ch.damping.value})")
    return EXIT_OK


def cmd_step(cfg: ScenarioConfig, out) -> int:
    g = _system(cfg)
    ts = step_response(g, cfg.step_horizon)
    m = step_metrics(ts)
    print(f"step response of {_label(cfg)}")
    print(f"  peak amplitude  {m.peak_amplitude:.4g}")
    print(f"  overshoot (%)   {m.overshoot_pct:.4g}")
    print(f"  rise time (s)   {m.rise_time:.4g}")
    print(f"  settling (s)    {m.settling_time:.4g}")
    print(f"  final value     {m.final_value:.4g}")
    if out:
        emit.write_step_csv(out / f"step_{_stem(cfg)}.csv", ts)
        emit.write_step_svg(out / f"step_{_stem(cfg)}.svg", ts, _label(cfg))
    return EXIT_OK


def cmd_bode(cfg: ScenarioConfig, out) -> int:
    g = _system(cfg)
    fr = frequency_response(g, _grid(cfg, g))
    rep = stability_margins(g, _grid(cfg, g))
    print(format_margin_table([MarginRow(_label(cfg), rep, verdict(rep))]))
    if out:
        emit.write_bode_csv(out / f"bode_{_stem(cfg)}.csv", fr)
        emit.write_bode_svg(out / f"bode_{_stem(cfg)}.svg", fr, _label(cfg))
    return EXIT_OK


def cmd_margins(cfg: ScenarioConfig, out) -> int:
    rows = []
    for c in Controller:
        sub = ScenarioConfig(
            converter=cfg.converter,
            mode=cfg.mode,
            domain=cfg.domain,
            controller=c,
            sample_time=cfg.sample_time,
            plant_source=cfg.plant_source,
        ).resolved()
        if c is cfg.controller:
            sub = cfg
        g = _system(sub)
        rep = stability_margins(g, _grid(cfg, g))
        rows.append(MarginRow(_label(sub), rep, verdict(rep)))
    print(format_margin_table(rows))
    return EXIT_OK


def cmd_pzmap(cfg: ScenarioConfig, out) -> int:
    g = _system(cfg)
    rep = pole_zero_report(g)
    print(f"pole-zero map of {_label(cfg)}: {rep.classification.value}")
    for kind, roots in (("pole", rep.poles), ("zero", rep.zeros)):
        for r in roots:
            print(f"  {kind}  {r.real:.4g} {r.imag:+.4g}j")
    for o in rep.offenders:
        print(f"  offender: {o.kind} {o.value.real:.4g} {o.value.imag:+.4g}j ({o.location.value})")
    if out:
        emit.write_pzmap_csv(out / f"pzmap_{_stem(cfg)}.csv", rep)
        emit.write_pzmap_svg(out / f"pzmap_{_stem(cfg)}.svg", rep, _label(cfg))
    return EXIT_OK


def cmd_simulate(cfg: ScenarioConfig, out) -> int:
    gains = cfg.gains
    if gains is None:
        raise ConfigError("simulate needs a pid or pidn controller")
    tr = simulate_closed_loop(cfg.converter, gains, cfg.sim)
    w = tr.window()
    print(f"simulated {cfg.sim.horizon:g} s of {cfg.sim.mode.value} at Ts = {cfg.sim.sample_time:g} s")
    print(f"  final v_C   {np.mean(tr.v_C[w]):.4g} V")
    print(f"  final i_L   {np.mean(tr.i_L[w]):.4g} A")
    print(f"  final duty  {np.mean(tr.duty[w]):.4g}")
    print(f"  final mode  {tr.mode[-1]}")
    if out:
        emit.write_trace_csv(out / f"trace_{cfg.sim.mode.value}.csv", tr)
        emit.write_trace_svg(out / f"trace_{cfg.sim.mode.value}.svg", tr, f"{cfg.sim.mode.value} simulation")
    return EXIT_OK


def cmd_report(cfg: ScenarioConfig, out, strict: bool = False, workers: int = 1) -> int:
    rows = summary(workers)
    print(format_summary(rows))
    if out:
        write_bundle(out, rows)
    if strict and any(r.gated and r.verdict == "fail" for r in rows):
        return EXIT_TOLERANCE
    return EXIT_OK


HANDLERS = {
    "model": cmd_model,
    "step": cmd_step,
    "bode": cmd_bode,
    "pzmap": cmd_pzmap,
    "margins": cmd_margins,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _scenario(args)
        if args.print_config:
            sys.stdout.write(dump_config(cfg, args.provenance))
            return EXIT_OK
        if args.command == "report":
            return cmd_report(cfg, args.out, args.strict, args.workers)
        return HANDLERS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"bbcloop: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        SimulationDiverged,
        HorizonTooShortError,
        IndeterminateError,
        PolynomialError,
        ZeroDivisionError,
        ArithmeticError,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"bbcloop: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except emit.EmitError as exc:
        print(f"bbcloop: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
