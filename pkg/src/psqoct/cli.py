"""Command-line front end.

Commands
--------
simulate   H and V scans plus the combined trace, written as CSV + JSON sidecar
extract    dips, separations, reflectance ratio and retardance from a CSV
null       nulling search at one delay: cascade angles and optical-axis angle
presets    list the built-in configurations or print one as JSON

Exit codes: 0 ok, 2 configuration or parse error, 3 physics error (no phase
matching, grid too narrow, out-of-band wavelength), 4 degenerate extraction.
Worker threads for the delay scan are capped by ``QOCT_THREADS``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from psqoct import __version__
from psqoct.errors import ConfigError, DegenerateError, DegenerateInputError, PhysicsError
from psqoct.extract import DEFAULT_PROMINENCE, extract_interferogram, nulling_protocol
from psqoct.interferometer import CoincidenceModel, interface_positions, simulate
from psqoct.io import (
    UM,
    RunConfig,
    read_interferogram,
    read_json,
    sample_from_dict,
    source_from_dict,
    write_interferogram,
    write_json,
)
from psqoct.materials import SPEED_OF_LIGHT
from psqoct.presets import DESCRIPTIONS, PRESETS, preset_dict
from psqoct.sample import dispersion_expansion, noncommuting_layers

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS, EXIT_DEGENERATE = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse already exits 2; keep the message terse
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="psqoct", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_inputs(p: argparse.ArgumentParser) -> None:
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--preset", choices=sorted(PRESETS), help="built-in configuration")
        group.add_argument("--config", type=Path, help="run configuration (JSON)")
        p.add_argument("--sample", type=Path, help="sample file (JSON); replaces the configured sample")
        p.add_argument("--bs-reflectance", type=float, help="beam-splitter power reflectance |r|^2")

    sim = sub.add_parser("simulate", help="H and V scans and the combined interferogram")
    run_inputs(sim)
    sim.add_argument("-o", "--output", default="interferogram", help="output prefix (default: %(default)s)")
    sim.add_argument("--start-um", type=float, help="first delay on the ctau axis (um)")
    sim.add_argument("--stop-um", type=float, help="last delay on the ctau axis (um)")
    sim.add_argument("--points", type=int, help="number of delay points")

    ext = sub.add_parser("extract", help="recover layer parameters from an interferogram")
    ext.add_argument("interferogram", type=Path, help="CSV written by simulate")
    ext.add_argument("--sidecar", type=Path, help="JSON sidecar (default: CSV path with .json)")
    ext.add_argument("--prominence", type=float, default=DEFAULT_PROMINENCE, help="dip threshold (default: %(default)s)")
    ext.add_argument("--max-winding", type=int, default=3, help="retardance branches to list (default: %(default)s)")
    ext.add_argument("-o", "--output", default="report.json", help="report path (default: %(default)s)")

    nul = sub.add_parser("null", help="nulling search for the optical-axis angle")
    run_inputs(nul)
    nul.add_argument("--ctau-um", type=float, help="delay of the targeted dip on the ctau axis (um)")
    nul.add_argument("--delta-deg", type=float, help="known retardance (deg); default: from the H/V levels")
    nul.add_argument("--coarse-step-deg", type=float, help="coarse grid step (deg, default 1)")
    nul.add_argument("-o", "--output", default="null.json", help="report path (default: %(default)s)")

    pre = sub.add_parser("presets", help="list presets or print one")
    pre.add_argument("name", nargs="?", choices=sorted(PRESETS), help="preset to print as JSON")
    return parser


def _load_run(args: argparse.Namespace) -> RunConfig:
    if args.preset:
        data = preset_dict(args.preset)
        base = None
    else:
        data = read_json(args.config)
        base = args.config.parent
    if args.sample is not None:
        data["sample"] = read_json(args.sample)
    if args.bs_reflectance is not None:
        data["beam_splitter"] = {"reflectance": args.bs_reflectance}
    grid = dict(data.get("grid", {}))
    for key in ("start_um", "stop_um", "points"):
        value = getattr(args, key, None)
        if value is not None:
            grid[key] = value
    if grid:
        data["grid"] = grid
    return RunConfig.from_dict(data, base)


def _layer_diagnostics(sample, omega0: float) -> list[dict]:
    out = []
    for layer in sample.layers:
        exp = dispersion_expansion(layer, omega0)
        out.append(
            {
                "thickness_um": layer.thickness / UM,
                "phase_path_um": float(layer.mean_index(omega0)) * layer.thickness / UM,
                "group_path_um": SPEED_OF_LIGHT * exp.beta1 * layer.thickness / UM,
                "retardance_rad": float(layer.retardance(omega0)),
            }
        )
    return out


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_run(args)
    src = source_from_dict(cfg.source)
    sample = sample_from_dict(cfg.sample, src.spectrum.omega0)
    bs = cfg.splitter()
    positions = cfg.positions()
    ig = simulate(sample, src.spectrum, bs, positions)
    sym = simulate(sample, src.spectrum.symmetrized(), bs, positions)
    sidecar = {
        "preset": cfg.preset,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "beam_splitter_reflectance": bs.reflectance,
        "grid": {"start_um": float(positions[0] / UM), "stop_um": float(positions[-1] / UM), "points": int(positions.size)},
        "source": src.metadata,
        "spectrum": {"points": src.spectrum.size, "half_span_rad_per_s": float(src.spectrum.offsets[-1])},
        "conventions": {
            "ctau_um": "c*tau/2 with tau the path delay; interface m at c*beta1*z_m, front surface at 0",
            "raw_ctau_um": "c*tau = 2*ctau_um",
            "lambda_argument": "Lambda is evaluated at 2*tau",
            "normalization": "rates divided by Lambda0; R_T = R_H + R_V - 1",
            "reference_arm": "H scan theta = 0, V scan theta = 45 deg (half-wave angle)",
        },
        "diagnostics": {
            "expected_interfaces_um": [float(v / UM) for v in interface_positions(sample, src.spectrum.omega0)]
            if sample.interfaces
            else [],
            "layers": _layer_diagnostics(sample, src.spectrum.omega0),
            "noncommuting_layers": noncommuting_layers(sample, src.spectrum.omega0) if sample.layers else [],
            "symmetrized_spectrum_max_abs_dRT": float(np.max(np.abs(sym.R_T - ig.R_T))),
        },
    }
    csv_path, json_path = write_interferogram(args.output, ig, sidecar)
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_extract(args: argparse.Namespace) -> int:
    ig, meta = read_interferogram(args.interferogram, args.sidecar)
    if ig.lambda0_H <= 0 or not np.any(ig.R_T):
        raise DegenerateInputError("interferogram is empty (the sample reflects no light)")
    report = extract_interferogram(ig, args.prominence, args.max_winding)
    if not report.interface_positions:
        raise DegenerateInputError(f"no interface dip deeper than {args.prominence} in R_T")
    out = _report_json(report)
    out["source_file"] = str(args.interferogram)
    if meta.get("preset"):
        out["preset"] = meta["preset"]
    write_json(args.output, out)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_null(args: argparse.Namespace) -> int:
    cfg = _load_run(args)
    ctau = args.ctau_um if args.ctau_um is not None else cfg.null.get("ctau_um")
    if ctau is None:
        raise ConfigError("null needs --ctau-um (or 'null.ctau_um' in the config)")
    delta = args.delta_deg if args.delta_deg is not None else cfg.null.get("delta_deg")
    step = args.coarse_step_deg if args.coarse_step_deg is not None else cfg.null.get("coarse_step_deg", 1.0)
    if not step > 0:
        raise ConfigError("coarse step must be positive")
    src = source_from_dict(cfg.source)
    sample = sample_from_dict(cfg.sample, src.spectrum.omega0)
    model = CoincidenceModel(sample, src.spectrum)
    report = nulling_protocol(
        model,
        float(ctau) * UM,
        cfg.splitter(),
        None if delta is None else float(np.deg2rad(delta)),
        float(np.deg2rad(step)),
    )
    out = _report_json(report)
    out["theta_star_deg"] = float(np.rad2deg(report.theta_star))
    out["phi_star_deg"] = float(np.rad2deg(report.phi_star))
    out["alpha_est_deg"] = float(np.rad2deg(report.alpha_est))
    out["preset"] = cfg.preset
    write_json(args.output, out)
    print(f"wrote {args.output}")
    return EXIT_OK


def _report_json(report) -> dict:
    data = report.to_dict()
    data["interface_positions_um"] = [p / UM for p in data.pop("interface_positions")]
    data["separations_um"] = [s / UM for s in data.pop("separations")]
    for m in data["midpoints"]:
        m["position_um"] = m.pop("position") / UM
        m["width_um"] = m.pop("width") / UM
    if data["residuals"] is not None:
        data["residuals"] = list(data["residuals"])
    return data


def cmd_presets(args: argparse.Namespace) -> int:
    if args.name:
        print(json.dumps(preset_dict(args.name), indent=2, sort_keys=True))
    else:
        for name in sorted(PRESETS):
            print(f"{name}\t{DESCRIPTIONS[name]}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "extract": cmd_extract, "null": cmd_null, "presets": cmd_presets}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except DegenerateError as exc:
        print(f"psqoct: degenerate extraction: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except PhysicsError as exc:
        print(f"psqoct: physics error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except (ConfigError, OSError, ValueError) as exc:
        print(f"psqoct: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
