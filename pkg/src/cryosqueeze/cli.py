"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 numerical failure.
Every failure writes one JSON line ``{"error": ..., "exit_code": ..., "message": ...}``
to standard error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from pathlib import Path

from . import __version__
from .checks import CHECKS, run_checks
from .config import ConfigError, RunConfig, config_to_dict, load_config
from .core_model import (
    ModelDomainError,
    PreconditionError,
    quantum_terms,
    shot_noise_floor,
    signal_transfer,
    sx_thermal,
)
from .decibel_loss import (
    LossChain,
    LossStage,
    NoSolutionError,
    SqueezeMeasurement,
    compose_losses,
    infer_eta_r,
    loss_gap_report,
)
from .fitting import FitError, UnitMismatchError, extract_physics, fit_spectrum
from .spectrum_io import SpectrumFormatError, dump_json, read_spectrum_csv, write_spectrum_csv
from .synth import Unit, model_curve, synth_spectrum

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3

LIMITATION = ("all squeezing degradation is modelled as passive optical loss; "
              "technical and phase noise are not separated")


class UsageError(Exception):
    pass


class CommandFailed(Exception):
    """Carries an already-written result together with a nonzero exit status."""

    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _timestamp(args) -> str | None:
    if args.reproducible:
        return None
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _emit(args, doc: dict, lines: list[str]) -> None:
    if args.json:
        sys.stdout.write(dump_json(doc))
    else:
        sys.stdout.write("\n".join(lines) + "\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _require_config(args) -> RunConfig:
    if not getattr(args, "config", None):
        raise UsageError("--config is required")
    return load_config(args.config)


def _dump_config(cfg: RunConfig) -> int:
    sys.stdout.write(dump_json(config_to_dict(cfg)))
    return EXIT_OK


def simulation_summary(cfg: RunConfig) -> dict:
    """Peak height above the floor and the floor itself, in the file's units."""
    mech, ifo, sqz, env = cfg.membrane, cfg.interferometer, cfg.squeezing, cfg.environment
    thermal_peak = sx_thermal(mech.omega_m, mech, env)
    summary = {"unit": cfg.synth.unit.value, "q_factor": mech.q}
    if cfg.synth.unit is Unit.DISPLACEMENT:
        summary["peak_height"] = 2.0 * math.pi * thermal_peak
        summary["floor"] = 2.0 * math.pi * sqz.variance_factor * shot_noise_floor(ifo, mech)
    else:
        transfer = signal_transfer(ifo, mech)
        summary["peak_height"] = thermal_peak * transfer
        summary["floor"] = quantum_terms(ifo, mech, sqz)
        if transfer == 0.0:
            summary["note"] = "no signal transfer"
    summary["peak_to_floor"] = summary["peak_height"] / summary["floor"]
    return summary


def cmd_simulate(args) -> int:
    cfg = _require_config(args)
    if args.dump_config:
        return _dump_config(cfg)
    if cfg.grid is None:
        raise ConfigError("grid section is required for simulate")
    if cfg.synth.unit is Unit.DISPLACEMENT and cfg.interferometer.p_in <= 0:
        raise ConfigError("synth.unit 'displacement' needs interferometer.p_in_w > 0; "
                          "use 'shot-normalized'")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created = _timestamp(args)
    parts = (cfg.grid, cfg.interferometer, cfg.membrane, cfg.squeezing, cfg.environment)
    files = {}
    model = model_curve(*parts, unit=cfg.synth.unit)
    files["model"] = str(out_dir / "model.csv")
    write_spectrum_csv(model, files["model"], created)
    if cfg.synth.seed is not None:
        noisy = synth_spectrum(*parts, averages=cfg.synth.averages, seed=cfg.synth.seed,
                               unit=cfg.synth.unit)
        files["synthetic"] = str(out_dir / "synthetic.csv")
        write_spectrum_csv(noisy, files["synthetic"], created)
    summary = simulation_summary(cfg)
    summary["files"] = files
    lines = [f"{k}: {_fmt(v)}" for k, v in summary.items() if k != "files"]
    lines += [f"wrote {path}" for path in files.values()]
    _emit(args, summary, lines)
    return EXIT_OK


def fit_report(spectrum_path, cfg: RunConfig | None, created: str | None) -> dict:
    spec = read_spectrum_csv(spectrum_path)
    options = cfg.fit if cfg is not None else None
    result = fit_spectrum(spec, options)
    report = {
        "schema": "cryosqueeze.fit-report/1",
        "spectrum": Path(spectrum_path).name,
        "unit": spec.unit.value,
        "params": result.params.as_dict(),
        "uncertainties": result.uncertainties,
        "chi2_per_dof": result.chi2_per_dof,
        "iterations": result.iterations,
        "q_factor": result.q_factor,
        "temperature": None,
        "inferred_squeezing_db": None,
        "converged": result.converged,
        "message": result.message,
        "limitations": LIMITATION,
    }
    if result.converged:
        ifo = cfg.interferometer if cfg is not None else None
        mech = cfg.membrane if cfg is not None else None
        physics = extract_physics(result, ifo, m_eff=mech.m_eff if mech else None, mech=mech)
        temperature = {
            "value_k": physics["temperature_k"],
            "uncertainty_k": physics["temperature_uncertainty_k"],
            "per_mass_k_per_kg": physics["temperature_per_mass_k_per_kg"],
        }
        if "temperature_scaled_100ng_k" in physics:
            temperature["scaled_100ng_k"] = physics["temperature_scaled_100ng_k"]
        report["temperature"] = temperature
        report["inferred_squeezing_db"] = physics["inferred_squeezing_db"]
    if created is not None:
        report["created"] = created
    return report


def cmd_fit(args) -> int:
    cfg = load_config(args.config) if args.config else None
    if args.dump_config:
        if cfg is None:
            raise UsageError("--dump-config needs --config")
        return _dump_config(cfg)
    report = fit_report(args.spectrum, cfg, _timestamp(args))
    Path(args.report).write_text(dump_json(report), encoding="utf-8")
    p = report["params"]
    lines = [f"{k}: {_fmt(v)}" for k, v in p.items()]
    lines += [f"q_factor: {_fmt(report['q_factor'])}", f"converged: {report['converged']}",
              f"wrote {args.report}"]
    _emit(args, report, lines)
    if not report["converged"]:
        raise CommandFailed(EXIT_NUMERICAL, "numerical", f"fit did not converge: {report['message']}")
    return EXIT_OK


def _parse_stage(text: str, index: int) -> LossStage:
    label, sep, value = text.partition("=")
    if not sep:
        label, value = f"stage{index + 1}", text
    try:
        return LossStage(label, float(value))
    except ValueError as exc:
        raise ConfigError(f"--chain entry {text!r}: {exc}") from None


def cmd_budget(args) -> int:
    pair = args.sqz is not None or args.antisqz is not None
    if pair and args.chain:
        raise UsageError("give either --sqz/--antisqz or --chain, not both")
    if pair:
        if args.sqz is None or args.antisqz is None:
            raise UsageError("--sqz and --antisqz must be given together")
        eta, r = infer_eta_r(SqueezeMeasurement(args.sqz, args.antisqz))
        doc = {
            "mode": "measurement",
            "sqz_db": args.sqz,
            "antisqz_db": args.antisqz,
            "efficiency": eta,
            "total_loss": 1.0 - eta,
            "squeeze_parameter": r,
            "intrinsic_squeezing_db": 20.0 * r / math.log(10.0),
            "limitations": LIMITATION,
        }
        lines = [f"efficiency: {eta:.4f}", f"total loss: {100 * (1 - eta):.2f} %",
                 f"squeeze parameter r: {r:.4f}",
                 f"intrinsic squeezing: {doc['intrinsic_squeezing_db']:.2f} dB",
                 f"note: {LIMITATION}"]
    elif args.chain:
        chain = LossChain(tuple(_parse_stage(t, i) for i, t in enumerate(args.chain)))
        eta = compose_losses(chain)
        doc = {
            "mode": "chain",
            "stages": [{"label": s.label, "efficiency": s.efficiency} for s in chain.stages],
            "efficiency": eta,
            "total_loss": 1.0 - eta,
        }
        lines = [f"chain efficiency: {eta:.4f}", f"total loss: {100 * (1 - eta):.2f} %"]
        if args.source_db is not None:
            gap = loss_gap_report(args.source_db, eta, args.observed_db)
            doc.update({k: v for k, v in gap.items() if k not in ("efficiency", "loss")})
            lines.append(f"{args.source_db:g} dB after loss: {gap['expected_db']:.2f} dB")
            if "non_loss_gap_db" in gap:
                lines.append(f"observed: {gap['observed_db']:g} dB, "
                             f"unexplained by loss: {gap['non_loss_gap_db']:.2f} dB")
            if "note" in gap:
                lines.append(f"note: {gap['note']}")
            doc["limitations"] = LIMITATION
        elif args.observed_db is not None:
            raise UsageError("--observed-db needs --source-db")
    else:
        raise UsageError("budget needs --sqz/--antisqz or --chain")
    _emit(args, doc, lines)
    return EXIT_OK


def cmd_check(args) -> int:
    if args.list:
        if args.json:
            sys.stdout.write(dump_json({"checks": list(CHECKS)}))
        else:
            sys.stdout.write("\n".join(CHECKS) + "\n")
        return EXIT_OK
    names = args.only or None
    if names:
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise UsageError(f"unknown check {unknown[0]!r}")
    results = run_checks(names)
    doc = {"checks": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results],
           "all_passed": all(r.passed for r in results)}
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}" for r in results]
    _emit(args, doc, lines)
    if not doc["all_passed"]:
        failed = ", ".join(r.name for r in results if not r.passed)
        raise CommandFailed(EXIT_NUMERICAL, "check-failed", f"failed checks: {failed}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                        help="machine-readable output on stdout")
    common.add_argument("--reproducible", action="store_true", default=argparse.SUPPRESS,
                        help="omit timestamps so outputs are byte-identical")
    common.add_argument("--dump-config", action="store_true", default=argparse.SUPPRESS,
                        help="print the effective configuration and exit")

    parser = _Parser(prog="cryosqueeze", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="write model and synthetic spectra")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="fit a spectrum CSV and write a JSON report")
    p.add_argument("spectrum")
    p.add_argument("--report", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("budget", parents=[common], help="loss budget from squeezing data")
    p.add_argument("--sqz", type=float, help="squeezing below shot noise, dB")
    p.add_argument("--antisqz", type=float, help="antisqueezing above shot noise, dB")
    p.add_argument("--chain", nargs="+", metavar="[LABEL=]EFF", help="stage efficiencies")
    p.add_argument("--source-db", type=float, help="squeezing entering the chain, dB")
    p.add_argument("--observed-db", type=float, help="squeezing actually observed, dB")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("check", parents=[common], help="run the built-in invariant checks")
    p.add_argument("--list", action="store_true")
    p.add_argument("--only", nargs="+", metavar="NAME")
    p.set_defaults(func=cmd_check)
    return parser


def _fail(kind: str, code: int, message: str) -> int:
    line = json.dumps({"error": kind, "exit_code": code, "message": " ".join(str(message).split())})
    sys.stderr.write(line + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        for flag in ("json", "reproducible", "dump_config"):
            if not hasattr(args, flag):
                setattr(args, flag, False)
        if args.command is None:
            raise UsageError("a command is required: simulate, fit, budget or check")
        if args.dump_config and args.command not in ("simulate", "fit"):
            raise UsageError("--dump-config applies to simulate and fit")
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, exc)
    except CommandFailed as exc:
        return _fail(exc.kind, exc.code, exc)
    except (ConfigError, SpectrumFormatError, NoSolutionError, UnitMismatchError,
            ModelDomainError, PreconditionError) as exc:
        return _fail("validation", EXIT_VALIDATION, exc)
    except FitError as exc:
        return _fail("numerical", EXIT_NUMERICAL, exc)
    except OSError as exc:
        return _fail("io", EXIT_VALIDATION, exc)
    except (ValueError, ArithmeticError) as exc:
        return _fail("numerical", EXIT_NUMERICAL, exc)


if __name__ == "__main__":
    sys.exit(main())
