"""Command-line entry point: ``phasedbs <subcommand> [--config] [--out] [--seed] [--check]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 failed
acceptance check (only with ``--check``).
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from .config import RunConfig, load_config
from .errors import ConfigError, DataError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CHECK = 0, 2, 3, 4


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _write_json(out, name, doc):
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _table(rows, header):
    cols = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cols) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cols]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _fmt(v, spec=".4g"):
    return "-" if v is None else format(v, spec)


class Checks:
    """Collects named pass/fail results for ``--check``."""

    def __init__(self):
        self.items = []

    def add(self, name, ok, detail=""):
        self.items.append((name, bool(ok), detail))

    def report(self):
        for name, ok, detail in self.items:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
        return all(ok for _, ok, _ in self.items)


# ------------------------------------------------------------- subcommands

def cmd_lutgen(cfg, args, checks):
    from .phase import LpeLuts, build_luts, sweep_errors
    from .connectivity import build_trig_lut

    luts = build_luts()
    doc = luts.to_json()
    path = _write_json(args.out, "luts.json", doc)
    LpeLuts.from_json(json.loads(open(path, encoding="utf-8").read()))
    trig = build_trig_lut()
    _write_json(args.out, "trig_lut.json", {"quarter_sin_256": trig.quarter.tolist()})
    if args.verify:
        try:
            other = LpeLuts.from_json(json.load(open(args.verify, encoding="utf-8")))
        except (OSError, ValueError, KeyError) as e:
            raise DataError(f"cannot verify {args.verify}: {e}") from None
        if other.digest() != luts.digest():
            raise DataError(f"{args.verify} differs from the regenerated tables")
    print(_table([["recip", len(luts.recip), luts.digest()[:16]],
                  ["lin", len(luts.lin), ""]], ["table", "entries", "sha256"]))
    print(json.dumps(luts.report, sort_keys=True))
    if args.check:
        err = sweep_errors("lpe", cfg.bench.bits)
        checks.add("LPE exhaustive sweep <= 1 code", err.max() <= 1, f"max {err.max():.3f}")


def cmd_fir_design(cfg, args, checks):
    from .experiments import measured_group_delay
    from .fir import THETA, design_filters, mac_budget

    rows, designs = [], {}
    for fs in cfg.filter_sets():
        key = fs.digest()
        if key in designs:
            continue
        designs[key] = fs.to_json()
        rows.append([f"{fs.band.f_lo_hz:g}-{fs.band.f_hi_hz:g}", fs.lpf_taps.size, fs.bpf_taps.size,
                     f"{fs.lpf_atten_db:.1f}", fs.group_delay_lpf, fs.group_delay_band,
                     f"{fs.group_delay_s * 1e3:.2f}", f"{measured_group_delay(fs):.2f}"])
    budget = mac_budget(cfg.filter_sets()[0], cfg.frontend.n_channels)
    _write_json(args.out, "filters.json", {"designs": designs, "mac_budget": budget})
    print(_table(rows, ["band_hz", "lpf_taps", "band_taps", "lpf_atten_db", "lpf_delay",
                        "band_delay", "total_ms", "measured"]))
    print(json.dumps(budget, sort_keys=True))
    if args.check:
        ref = design_filters(THETA, band_taps=63)
        checks.add("63-tap band group delay == 31 samples", ref.group_delay_band == 31,
                   f"{ref.group_delay_band}")
        fs = cfg.filter_sets()[0]
        d = measured_group_delay(fs)
        checks.add("measured theta delay 31 +/- 1 samples", abs(d - 31) <= 1, f"{d:.3f}")


def cmd_run(cfg, args, checks):
    from .experiments import run_offline

    t0 = time.perf_counter()
    result, summary = run_offline(cfg, args.out)
    elapsed = time.perf_counter() - t0
    seconds = summary["n_input_samples"] / cfg.frontend.per_channel_rate_hz
    print(_table([[summary["n_channels"], f"{seconds:g}", summary["n_windows"], summary["n_triggers"],
                   summary["fir_saturations"], summary["clipped_codes"],
                   f"{seconds / elapsed:.1f}" if elapsed > 0 else "-"]],
                 ["channels", "seconds", "windows", "triggers", "saturations", "clipped", "x_realtime"]))
    print(json.dumps({k: summary[k] for k in ("n_triggers", "n_windows", "fir_saturations",
                                              "config_sha256", "input_sha256")}, sort_keys=True))
    if args.check:
        _, again = run_offline(cfg, None)
        checks.add("summary reproducible", again == summary)
        checks.add("no FIR saturation", summary["fir_saturations"] == 0, str(summary["fir_saturations"]))


def cmd_simulate(cfg, args, checks):
    from .dataio import write_stim_trace
    from .experiments import charge_balance_experiment

    r = charge_balance_experiment(cfg)
    os.makedirs(args.out, exist_ok=True)
    write_stim_trace(os.path.join(args.out, "stim_trace.csv"), r.pop("single_pulse_trace"))
    traces = r.pop("traces")
    t0 = 0.0
    with open(os.path.join(args.out, "stim_trace_cb.csv"), "w", encoding="utf-8") as fh:
        fh.write("pulse,t_us,i_ua,v_out_mv,v_cap_mv\n")
        for k, tr in enumerate(traces):
            for t, i, vo, vc in zip(tr.t_us, tr.i_ua, tr.v_out, tr.v_cap):
                fh.write(f"{k},{t0 + t!r},{i!r},{vo * 1e3!r},{vc * 1e3!r}\n")
            t0 += cfg.charge_balance.interval_us
    _write_json(args.out, "simulate.json", r)
    res = r["residuals_mv"]
    print(_table([[k + 1, f"{v:+.3f}", f"{i:g}"] for k, (v, i) in enumerate(zip(res, r["anodic_currents_ua"]))],
                 ["pulse", "residual_mv", "i_anodic_ua"]))
    print(json.dumps({k: r[k] for k in ("uncompensated_residual_mv", "closed_form_residual_mv",
                                        "settled_from_pulse")}, sort_keys=True))
    if args.check:
        u = r["uncompensated_residual_mv"]
        checks.add("uncompensated residual 15.15 +/- 0.2 mV", abs(u - 15.15) <= 0.2, f"{u:.4f} mV")
        s = r["settled_from_pulse"]
        checks.add("|residual| < V_SAFE from pulse <= 20 onward", s is not None and s <= 20, f"pulse {s}")


def cmd_phase_error(cfg, args, checks):
    from .experiments import noise_sweep, phase_error_experiment

    on = phase_error_experiment(cfg, compensate=True)
    off = phase_error_experiment(cfg, compensate=False)
    sweep = noise_sweep(cfg)
    _write_json(args.out, "phase_error.json", {"compensated": on, "uncompensated": off, "noise_sweep": sweep})
    rows = [[name, r["n_scored"], _fmt(r["stats"]["circular_mean_deg"], ".2f"),
             _fmt(r["stats"]["circular_resultant_r"], ".4f")] for name, r in (("compensated", on), ("uncompensated", off))]
    rows += [[f"pink x{x['level']:g}", x["n_scored"], _fmt(x["circular_mean_deg"], ".2f"), _fmt(x["r"], ".4f")]
             for x in sweep["runs"]]
    print(_table(rows, ["run", "triggers", "mean_deg", "r"]))
    print(json.dumps({"compensated": on["stats"]["circular_mean_deg"],
                      "uncompensated": off["stats"]["circular_mean_deg"],
                      "noise_r": [x["r"] for x in sweep["runs"]]}, sort_keys=True))
    if args.check:
        m, r = on["stats"]["circular_mean_deg"], on["stats"]["circular_resultant_r"]
        checks.add("compensated |mean| <= 5 deg and r >= 0.95", on["status"] == "ok" and abs(m) <= 5 and r >= 0.95,
                   f"mean {m:.2f}, r {r:.4f}")
        m = off["stats"]["circular_mean_deg"]
        checks.add("uncompensated mean -67 +/- 3 deg", off["status"] == "ok" and abs(m + 67) <= 3, f"{m:.2f}")
        checks.add("r decreases with pink noise", sweep["monotonic"])
        checks.add("noise sweep free of saturation", sweep["saturation_free"])


def cmd_correlate(cfg, args, checks):
    from .experiments import correlation_experiment

    out = correlation_experiment(cfg)
    _write_json(args.out, "correlate.json", out)
    print(_table([[k, v["n_windows"], _fmt(v["r"], ".4f"), v["degenerate"]] for k, v in out.items()],
                 ["feature", "windows", "pearson_r", "degenerate"]))
    print(json.dumps({k: v["r"] for k, v in out.items()}, sort_keys=True))
    if args.check:
        for k, v in out.items():
            ok = not v["degenerate"] and v["r"] >= 0.95 and v["n_windows"] >= 200
            checks.add(f"{k} Pearson r >= 0.95 over >= 200 windows", ok, _fmt(v["r"], ".4f"))


def cmd_bench(cfg, args, checks):
    from .experiments import bench_compare

    b = cfg.bench
    out = bench_compare(b.bits, b.repeats, b.throughput_seconds, cfg.seed)
    _write_json(args.out, "bench.json", out)
    rows = []
    for name, k in out["kernels"].items():
        ops = k["ops"]
        rows.append([name, f"{k['max_error_codes']:.3f}", f"{k['mean_error_codes']:.4f}", ops["multiplies"],
                     ops["table_lookups"], ops["shift_adds"], ops["comparisons"],
                     *(f"{k['conversions_per_s'].get(be, float('nan')):.3g}" for be in ("numba", "numpy"))])
    print(_table(rows, ["kernel", "max_err", "mean_err", "mul", "lut", "shift_add", "cmp",
                        "conv/s numba", "conv/s numpy"]))
    pipe = out["pipeline"]
    print(_table([[be, f"{pipe[be]['input_samples_per_s']:.3g}", f"{pipe[be]['realtime_factor']:.1f}"]
                  for be in ("numba", "numpy") if be in pipe], ["backend", "input_samples/s", "x_realtime"]))
    if args.check:
        for name in ("lpe", "cordic"):
            m = out["kernels"][name]["max_error_codes"]
            checks.add(f"{name} exhaustive max error <= 1 code", m <= 1, f"{m:.3f}")
        best = max(v["realtime_factor"] for k, v in pipe.items() if isinstance(v, dict))
        checks.add("16-channel closed loop >= 100x real time", best >= 100, f"{best:.1f}x")


COMMANDS = {
    "lutgen": (cmd_lutgen, "regenerate and verify the phase-extractor tables"),
    "fir-design": (cmd_fir_design, "design the per-channel filter sets and report delays"),
    "run": (cmd_run, "closed-loop offline run: features, phases, triggers, summary"),
    "simulate": (cmd_simulate, "stimulator pulses into the RC electrode with charge balancing"),
    "phase-error": (cmd_phase_error, "phase-locking error with and without compensation, noise sweep"),
    "correlate": (cmd_correlate, "fixed-point vs ideal PLV/PAC correlation"),
    "bench": (cmd_bench, "LPE vs CORDIC accuracy, op counts and throughput"),
}


def build_parser():
    p = argparse.ArgumentParser(prog="phasedbs", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config", help="JSON run configuration (defaults apply when omitted)")
        s.add_argument("--out", default="out", help="output directory (default: out)")
        s.add_argument("--seed", type=_u64, help="override the configured seed")
        s.add_argument("--check", action="store_true", help="evaluate acceptance checks; exit 4 on failure")
        if name == "lutgen":
            s.add_argument("--verify", help="existing luts.json to compare against")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        checks = Checks()
        np.seterr(all="ignore")
        COMMANDS[args.command][0](cfg, args, checks)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    if args.check and not checks.report():
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
