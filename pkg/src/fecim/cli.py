"""Command-line front end: named experiments over the device, cell,
array, inference, and performance layers, with deterministic file outputs.

Subcommands: device-sweep | cell-sweep | nmr | monte-carlo | infer |
energy | calibrate. Outputs are CSV for sweep data and JSON for reports;
every file embeds the resolved-config hash and the seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import datasets, nn, perf
from .array import compute_nmr, enumerate_mac_levels, monte_carlo_mac
from .calibrate import CalibrationTargets, calibrate_cell
from .cell import cell_iv_sweep, cell_output_current, encode_state
from .configio import ExperimentConfig, UsageError, dump_design, load_config
from .constants import T_REF_K, kelvin_to_celsius
from .devices import drain_current


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def _stamp(cfg: ExperimentConfig) -> str:
    return f"# config_hash={cfg.config_hash()} seed={cfg.seed}\n"


def _json_report(cfg: ExperimentConfig, payload: dict) -> str:
    doc = {"config_hash": cfg.config_hash(), "seed": cfg.seed}
    doc.update(payload)
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_device_sweep(cfg: ExperimentConfig) -> list:
    design = cfg.design()
    bias = cfg.bias()
    grid_t = cfg.t_grid_k()
    if grid_t.size == 0:
        raise UsageError("temperature.points", "empty temperature grid")
    v_gs = np.round(np.arange(-0.5, 1.2 + 1e-9, 0.005), 9)
    outputs = []
    n_levels = len(design.vth_table.levels)
    for t in grid_t:
        cols = []
        for level in range(n_levels):
            vth = design.vth_table.vth_at(level, float(t),
                                          design.fefet.vth_temp_coeff)
            i = drain_current(design.fefet, vth, v_gs, bias.v_dl, float(t),
                              vth_temp_shift=False)
            cols.append(np.atleast_1d(i))
        header = "v_gs_v," + ",".join(f"i_level{k}_a" for k in range(n_levels))
        lines = [header]
        for j, v in enumerate(v_gs):
            lines.append(f"{v:.4f}," + ",".join(f"{c[j]:.9e}" for c in cols))
        tc = kelvin_to_celsius(float(t))
        path = cfg.out_dir / f"device_sweep_t{tc:07.2f}C.csv"
        _atomic_write(path, _stamp(cfg) + "\n".join(lines) + "\n")
        outputs.append(path)
    return outputs


def cmd_cell_sweep(cfg: ExperimentConfig) -> list:
    design = cfg.design()
    bias = cfg.bias()
    arr = cfg.array()
    digits = range(1 << arr.bits_per_cell)
    v_grid = np.round(np.arange(0.0, 0.6 + 1e-9, 0.005), 9)
    curves = {d: cell_iv_sweep(encode_state(d, arr.bits_per_cell), v_grid,
                               T_REF_K, bias, design)[:, 1]
              for d in digits}
    lines = ["v_read_v," + ",".join(f"i_digit{d}_a" for d in digits)]
    for j, v in enumerate(v_grid):
        lines.append(f"{v:.4f}," + ",".join(f"{curves[d][j]:.9e}" for d in digits))
    iv_path = cfg.out_dir / "cell_iv.csv"
    _atomic_write(iv_path, _stamp(cfg) + "\n".join(lines) + "\n")

    grid_t = cfg.t_grid_k()
    lines = ["t_k,t_c," + ",".join(
        f"i_digit{d}_a,fluct_digit{d}" for d in digits if d >= 1)]
    ref = {d: cell_output_current(encode_state(d, arr.bits_per_cell), 1,
                                  bias, T_REF_K, design)
           for d in digits}
    for t in grid_t:
        cells = []
        for d in digits:
            if d < 1:
                continue
            i = cell_output_current(encode_state(d, arr.bits_per_cell), 1,
                                    bias, float(t), design)
            cells.append(f"{i:.9e},{abs(i - ref[d]) / ref[d]:.6f}")
        lines.append(f"{t:.3f},{kelvin_to_celsius(float(t)):.2f}," + ",".join(cells))
    fl_path = cfg.out_dir / "cell_fluctuation.csv"
    _atomic_write(fl_path, _stamp(cfg) + "\n".join(lines) + "\n")
    return [iv_path, fl_path]


def cmd_nmr(cfg: ExperimentConfig) -> list:
    design = cfg.design()
    arr = cfg.array()
    grid_t = cfg.t_grid_k()
    outputs = []
    report = {"rows": arr.rows, "bits_per_cell": arr.bits_per_cell,
              "t_grid_k": [float(t) for t in grid_t], "per_digit": {}}
    worst = None
    for d in range(1, 1 << arr.bits_per_cell):
        levels = enumerate_mac_levels(arr, d, grid_t, design)
        nmr = compute_nmr(levels)
        report["per_digit"][str(d)] = nmr.to_json_dict()
        worst = nmr.nmr_min if worst is None else min(worst, nmr.nmr_min)
        path = cfg.out_dir / f"nmr_levels_digit{d}.csv"
        _atomic_write(path, _stamp(cfg) + levels.to_csv(nmr))
        outputs.append(path)
    report["nmr_min"] = worst
    report["binary_nmr_min"] = report["per_digit"]["1"]["nmr_min"]
    jpath = cfg.out_dir / "nmr_report.json"
    _atomic_write(jpath, _json_report(cfg, report))
    outputs.append(jpath)
    return outputs


def cmd_monte_carlo(cfg: ExperimentConfig) -> list:
    design = cfg.design()
    arr = cfg.array()
    runs = cfg._int("variation", "runs")
    sigma = cfg._float("variation", "sigma_vt")
    t = T_REF_K
    outputs = []
    report = {"runs": runs, "sigma_vt_v": sigma, "per_digit": {}}
    for d in range(1, 1 << arr.bits_per_cell):
        rep = monte_carlo_mac(arr, d, runs, sigma, cfg.seed, t, design)
        report["per_digit"][str(d)] = rep.to_json_dict()
    jpath = cfg.out_dir / "monte_carlo_report.json"
    _atomic_write(jpath, _json_report(cfg, report))
    outputs.append(jpath)
    return outputs


def _load_dataset(cfg: ExperimentConfig):
    spec = cfg.get("inference", "dataset").strip()
    if spec.startswith("synthetic:"):
        params = dict(p.split("=") for p in spec.split(":", 1)[1].split(","))
        n = int(params.get("n", "128"))
        seed = int(params.get("seed", "7"))
        return datasets.synthetic_digits(n, seed=seed)
    if spec.startswith("idx:"):
        images, labels = spec.split(":", 1)[1].split(",")
        return datasets.load_idx_dataset(images, labels)
    if not Path(spec).exists():
        raise UsageError("inference.dataset", f"file not found: {spec}")
    return datasets.load_csv_dataset(spec)


def _load_weights(cfg: ExperimentConfig):
    spec = cfg.get("inference", "weights").strip()
    if spec.startswith("synthetic:"):
        params = dict(p.split("=") for p in spec.split(":", 1)[1].split(","))
        weights, biases = datasets.make_demo_network(
            seed=int(params.get("seed", "0")))
        return weights, biases
    if not Path(spec).exists():
        raise UsageError("inference.weights", f"file not found: {spec}")
    return datasets.load_weights(spec), None


def cmd_infer(cfg: ExperimentConfig) -> list:
    arr = cfg.array()
    mode = None
    mode_text = cfg.get("inference", "mode")
    for m in nn.FidelityMode:
        if m.value == mode_text:
            mode = m
    if mode is None:
        raise UsageError("inference.mode", f"unknown mode {mode_text!r}")
    inputs, labels = _load_dataset(cfg)
    weights, biases = _load_weights(cfg)
    net = nn.build_network(weights, arr.bits_per_cell, biases)
    icfg = nn.InferenceConfig(
        mode=mode,
        rows=arr.rows,
        sigma_table=cfg.sigma_table(),
        design=cfg.design(),
        bias_cfg=cfg.bias(),
    )
    repeats = cfg._int("inference", "repeats")
    report = nn.infer(net, inputs, labels, icfg, repeats=repeats, seed=cfg.seed)
    payload = report.to_json_dict()
    payload["per_layer"] = [
        {
            "in_features": l.in_features,
            "out_features": l.out_features,
            "n_digits": l.n_digits,
            "scale": l.scale,
            "digit_histogram": {
                str(k): v for k, v in nn.weight_state_frequencies(
                    nn.MappedNetwork(layers=(l,), bits_per_cell=arr.bits_per_cell)
                ).items()
            },
        }
        for l in net.mapped.layers
    ]
    jpath = cfg.out_dir / "infer_report.json"
    _atomic_write(jpath, _json_report(cfg, payload))
    return [jpath]


def cmd_energy(cfg: ExperimentConfig) -> list:
    from .array import ArrayConfig

    base = cfg.array()
    arr = ArrayConfig(
        rows=cfg._int("perf", "rows"),
        cols=cfg._int("perf", "cols"),
        bits_per_cell=base.bits_per_cell,
        bias=base.bias,
        adc_sharing=base.adc_sharing,
    )
    adc_bits = cfg._int("perf", "adc_bits")
    samples = cfg._int("perf", "samples")
    name = cfg.get("perf", "constants")
    if name == "calibrated-45nm":
        constants = perf.calibrated_45nm()
    elif Path(name).exists():
        constants = perf.load_constants(name)
    else:
        raise UsageError("perf.constants",
                         f"unknown constants set or missing file {name!r}")
    report = perf.workload_perf(perf.REFERENCE_STACK, samples, arr, constants,
                                adc_bits=adc_bits,
                                bits_per_cell=arr.bits_per_cell)
    lines = ["layer,fan_in,out_features,positions,macs,read_cycles"]
    for idx, l in enumerate(perf.REFERENCE_STACK):
        cyc = perf.count_read_cycles([l], arr.bits_per_cell, arr.rows)
        lines.append(f"{idx},{l.fan_in},{l.out_features},{l.positions},"
                     f"{l.macs},{cyc}")
    cpath = cfg.out_dir / "energy_layers.csv"
    _atomic_write(cpath, _stamp(cfg) + "\n".join(lines) + "\n")
    jpath = cfg.out_dir / "energy_report.json"
    _atomic_write(jpath, _json_report(cfg, report.to_json_dict()))
    return [cpath, jpath]


def cmd_calibrate(cfg: ExperimentConfig, dump_path: str | None) -> list:
    targets = CalibrationTargets(
        on_off_ratio=cfg._float("calibration", "on_off_ratio"),
        r_on_ohms=cfg._float("calibration", "r_on_ohms"),
        v_read=cfg._float("calibration", "v_read"),
    )
    result = calibrate_cell(targets, cfg.design())
    payload = {
        "i_s": result.i_s,
        "xi": result.xi,
        "ratio_residual": result.ratio_residual,
        "r_on_residual": result.r_on_residual,
        "iterations": result.iterations,
        "targets": {
            "on_off_ratio": targets.on_off_ratio,
            "r_on_ohms": targets.r_on_ohms,
            "v_read": targets.v_read,
        },
    }
    jpath = cfg.out_dir / "calibration.json"
    _atomic_write(jpath, _json_report(cfg, payload))
    outputs = [jpath]
    if dump_path:
        text = dump_design(
            result.design,
            erased_coeff=cfg._float("device.vth_table", "erased_temp_coeff"),
            mlc_span=cfg._float("device.vth_table", "mlc_span"),
        )
        dpath = Path(dump_path)
        _atomic_write(dpath, text)
        outputs.append(dpath)
    return outputs


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

COMMANDS = {
    "device-sweep": cmd_device_sweep,
    "cell-sweep": cmd_cell_sweep,
    "nmr": cmd_nmr,
    "monte-carlo": cmd_monte_carlo,
    "infer": cmd_infer,
    "energy": cmd_energy,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fecim",
        description="Ferroelectric compute-in-memory behavioral simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["calibrate"]:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="experiment config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--print-config", action="store_true",
                       help="print the resolved configuration and exit")
        p.add_argument("--set", nargs=2, action="append", default=[],
                       metavar=("SECTION.KEY", "VALUE"),
                       help="override one configuration value")
        if name == "calibrate":
            p.add_argument("--dump-calibration", default=None,
                           metavar="PATH",
                           help="write fitted device parameters to PATH")
    return parser


def _apply_thread_limit(n: int):
    """Cap the kernel thread pool; the orchestration itself stays
    single-threaded and dispatches parallel work into the kernels."""
    if n < 1:
        raise UsageError("experiment.threads", "need at least one thread")
    try:
        import warnings

        import numba

        with warnings.catch_warnings():
            # threading-layer probing is noisy on some installs
            warnings.simplefilter("ignore")
            numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(("experiment.seed", str(args.seed)))
        if args.out is not None:
            overrides.append(("experiment.out_dir", args.out))
        if args.threads is not None:
            overrides.append(("experiment.threads", str(args.threads)))
        cfg = load_config(args.config, overrides)
        _apply_thread_limit(cfg.threads)
        if args.print_config:
            sys.stdout.write(cfg.resolved_text())
            return 0
        if args.command == "calibrate":
            outputs = cmd_calibrate(cfg, args.dump_calibration)
        else:
            outputs = COMMANDS[args.command](cfg)
        for path in outputs:
            print(path)
        return 0
    except UsageError as e:
        sys.stderr.write(json.dumps(
            {"error": "usage", "field": e.field_path, "message": str(e)}
        ) + "\n")
        return 2
    except Exception as e:  # noqa: BLE001 - CLI boundary
        sys.stderr.write(json.dumps(
            {"error": type(e).__name__, "message": str(e)}
        ) + "\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
