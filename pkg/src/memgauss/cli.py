"""Command-line front end.

Every analysis command writes plot-ready CSV (``--out``) and prints a JSON
run report on stdout. Exit codes: 0 success, 1 analysis/domain error,
2 usage or parse error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import mna, netlist, regression, synth
from .errors import MemgaussError, ParseError
from .memristor import MemristorParams, MemristorState, loop_area, simulate_iv
from .netlist import AcSweep
from .rational_tf import (
    PUBLISHED_APPROXIMANT,
    DcPole,
    NoCutoffFound,
    RationalTransferFunction,
    UnstableSystem,
    best_gaussian_sigma,
    cutoff_frequency,
    dc_gain,
    dc_gain_exact,
    freq_response,
    overshoot,
    phase_at,
    step_response,
)

#: significant digits written to CSV cells
CSV_DIGITS = 10

# operating figures quoted alongside the published approximant
PUBLISHED_CUTOFF_HZ = 4.78
PUBLISHED_PHASE_DEG = -135.0


class UsageError(ParseError):
    pass


#: decimals for dB / degree columns (absolute resolution)
FIXED_DECIMALS = 9


def _fmt(x) -> str:
    return format(float(x), f".{CSV_DIGITS}g")


def _fmt_fixed(x) -> str:
    s = format(float(x), f".{FIXED_DECIMALS}f")
    return "0." + "0" * FIXED_DECIMALS if s == "-0." + "0" * FIXED_DECIMALS else s


def _write_csv(path, header, rows):
    """Write rows; columns whose header starts with mag_db/phase_deg are fixed-point."""
    if path is None:
        return
    fixed = [h.startswith(("mag_db", "phase_deg")) for h in header]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt_fixed(v) if f else _fmt(v) for v, f in zip(row, fixed)])


def _digest(text: str) -> str:
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _report(args, argv, digest, results, warns, error=None):
    rep = {
        "command": ["memgauss"] + list(argv),
        "input_digest": digest,
        "results": results,
        "warnings": warns,
    }
    if error is not None:
        rep["error"] = error
    print(json.dumps(_clean(rep), indent=2, sort_keys=True))


def _read_text(path) -> str:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    return raw.decode("utf-8", errors="replace")


def _float_list(text: str) -> list[float]:
    try:
        vals = [netlist.parse_value(tok.strip()) for tok in text.split(",") if tok.strip()]
    except ParseError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _si_value(text: str) -> float:
    try:
        return netlist.parse_value(text)
    except ParseError:
        raise argparse.ArgumentTypeError(f"bad numeric value {text!r}")


def _memristor_params(args) -> MemristorParams:
    try:
        return MemristorParams(args.r_on, args.r_off, args.d, args.mu, args.p)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _add_memristor_flags(p):
    g = p.add_argument_group("memristor parameters")
    d = MemristorParams()
    g.add_argument("--r-on", type=_si_value, default=d.r_on, help="fully doped memristance (ohm)")
    g.add_argument("--r-off", type=_si_value, default=d.r_off, help="undoped memristance (ohm)")
    g.add_argument("--d", type=_si_value, default=d.d, help="film thickness (m)")
    g.add_argument("--mu", type=_si_value, default=d.mu_v, help="dopant mobility (m^2/V/s)")
    g.add_argument("--p", type=int, default=d.window_p, help="Joglekar window exponent")


# --------------------------------------------------------------------------
# commands


def cmd_check(args, argv):
    text = _read_text(args.netlist)
    circuit = netlist.parse(text, strict=False)
    diags = netlist.validate(circuit)
    for d in diags:
        print(d)
    return 1 if diags else 0


def _ac_rows_and_results(c, sol):
    probes = list(c.probes)
    resps = [sol.response(p) for p in probes]
    if len(probes) == 1:
        header = ["freq_hz", "mag_db", "phase_deg"]
    else:
        header = ["freq_hz"]
        for p in probes:
            header += [f"mag_db:{p}", f"phase_deg:{p}"]
    rows = []
    for k, f in enumerate(sol.freqs):
        row = [f]
        for r in resps:
            row += [r.magnitude_db[k], r.phase_deg[k]]
        rows.append(row)
    results, warns = {}, []
    for p, r in zip(probes, resps):
        peak_f, peak_db = r.peak()
        entry = {
            "low_freq_gain": float(abs(r.values[0])),
            "peak_hz": peak_f,
            "peak_db": peak_db,
        }
        try:
            fc = mna.circuit_cutoff(c, p, sol)
            entry["cutoff_hz"] = fc
            entry["phase_at_cutoff_deg"] = float(
                np.angle(mna.solve_ac_point(c, fc, idx=sol.index)[sol.index.node[p]], deg=True)
            )
            entry["phase_at_cutoff_unwrapped_deg"] = float(
                np.interp(np.log(fc), np.log(r.freqs), r.phase_unwrapped_deg)
            )
        except NoCutoffFound as exc:
            entry["cutoff_hz"] = None
            warns.append(f"{p}: {exc}")
        results[p] = entry
    return header, rows, results, warns


def _load_circuit(args):
    if getattr(args, "builtin", None) == "ladder":
        c = synth.build_gaussian_ladder()
        text = netlist.serialize(c)
        return c, _digest(text)
    if args.netlist is None:
        raise UsageError("give a netlist path or --builtin")
    text = _read_text(args.netlist)
    return netlist.parse(text), _digest(text)


def cmd_ac(args, argv):
    c, digest = _load_circuit(args)
    if not c.probes:
        raise mna.MissingAnalysis("netlist has no .probe directive; nothing to report")
    sol = mna.ac_sweep(c)
    header, rows, results, warns = _ac_rows_and_results(c, sol)
    results["kcl_residual_rel"] = mna.kcl_residual(c, sol, relative=True)
    _write_csv(args.out, header, rows)
    _report(args, argv, digest, results, warns)
    return 0


def cmd_tran(args, argv):
    c, digest = _load_circuit(args)
    if c.transient is None:
        raise mna.MissingAnalysis("netlist has no .tran directive")
    sol = mna.transient(c, method=args.method)
    probes = list(c.probes) or sorted(sol.index.nodes)
    mems = list(sol.memristor_fraction)
    header = ["time_s"] + [f"v({p})" for p in probes] + [f"w({m})" for m in mems]
    cols = [sol.voltage(p) for p in probes] + [sol.memristor_fraction[m] for m in mems]
    rows = [[t] + [col[k] for col in cols] for k, t in enumerate(sol.times)]
    _write_csv(args.out, header, rows)
    results = {
        "steps": int(sol.times.size - 1),
        "dt": sol.dt,
        "final": {p: float(sol.voltage(p)[-1]) for p in probes},
        "memristor_fraction_range": {
            m: [float(np.min(w)), float(np.max(w))] for m, w in sol.memristor_fraction.items()
        },
        "kcl_residual_rel": mna.kcl_residual(c, sol, relative=True),
    }
    _report(args, argv, digest, results, [])
    return 0


def cmd_hysteresis(args, argv):
    if not args.amplitude > 0:
        raise UsageError("--amplitude must be positive")
    if any(not f > 0 for f in args.freq):
        raise UsageError("--freq values must be positive")
    if args.cycles < 1 or args.steps_per_cycle < 100:
        raise UsageError("need --cycles >= 1 and --steps-per-cycle >= 100")
    if not 0.0 <= args.w0 <= 1.0:
        raise UsageError("--w0 must lie in [0, 1]")
    params = _memristor_params(args)
    multi = len(args.freq) > 1
    header = (["freq_hz"] if multi else []) + ["t_s", "v_V", "i_A"]
    rows, runs = [], []
    for f in args.freq:
        tr = simulate_iv(
            params,
            args.amplitude,
            f,
            args.cycles,
            args.steps_per_cycle,
            MemristorState.from_fraction(params, args.w0),
        )
        for t, v, i in zip(tr.t, tr.v, tr.i):
            rows.append(([f] if multi else []) + [t, v, i])
        areas = [loop_area(tr.cycle(k)) for k in range(args.cycles)]
        near_zero = np.abs(tr.v) <= 1e-12
        runs.append(
            {
                "freq_hz": f,
                "loop_area_per_cycle": areas,
                "m_min": float(np.min(tr.m)),
                "m_max": float(np.max(tr.m)),
                "m_within_bounds": bool(
                    np.all((tr.m >= params.r_on) & (tr.m <= params.r_off))
                ),
                "max_abs_i_at_zero_v": float(np.max(np.abs(tr.i[near_zero]), initial=0.0)),
            }
        )
    last = [r["loop_area_per_cycle"][-1] for r in runs]
    results = {
        "r_on": params.r_on,
        "r_off": params.r_off,
        "runs": runs,
        "final_cycle_area_decreasing_with_freq": bool(
            all(a > b for a, b in zip(last, last[1:]))
        ),
    }
    _write_csv(args.out, header, rows)
    _report(args, argv, None, results, [])
    return 0


def _step_window(tf):
    poles = tf.poles()
    if poles.size == 0:
        return 1.0, 1e-3
    decay = float(np.min(np.abs(poles.real)))
    if np.any(poles.real >= 0) or decay == 0.0:
        return None
    t_end = 40.0 / decay
    return t_end, t_end / 20000.0


def cmd_tf(args, argv):
    if args.paper_eq11:
        if args.num or args.den:
            raise UsageError("--paper-eq11 excludes --num/--den")
        tf = PUBLISHED_APPROXIMANT
    else:
        if not (args.num and args.den):
            raise UsageError("give --num and --den (ascending powers of s) or --paper-eq11")
        try:
            tf = RationalTransferFunction.from_coefficients(args.num, args.den)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    digest = _digest(json.dumps([tf.numerator.coefficients, tf.denominator.coefficients]))
    freqs = AcSweep(args.ppd, args.fstart, args.fstop).frequencies()
    resp = freq_response(tf, freqs)
    _write_csv(
        args.out,
        ["freq_hz", "mag_db", "phase_deg"],
        zip(resp.freqs, resp.magnitude_db, resp.phase_deg),
    )
    results, warns, error = {}, [], None
    try:
        results["dc_gain"] = dc_gain(tf)
        results["dc_gain_exact"] = str(dc_gain_exact(tf))
        fc = cutoff_frequency(tf)
        results["cutoff_hz"] = fc
        results["phase_at_cutoff_deg"] = phase_at(tf, fc)
        window = _step_window(tf)
        if window is None:
            warns.append("poles on or right of the imaginary axis; step response skipped")
        else:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", UnstableSystem)
                w = step_response(tf, *window)
            warns += [str(c.message) for c in caught]
            results["step_t_end_s"] = window[0]
            results["step_final_value"] = w.final_value
            if results["dc_gain"] != 0:
                results["step_overshoot_pct"] = overshoot(w, results["dc_gain"])
        sigma, err = best_gaussian_sigma(tf, freqs)
        results["gaussian_best_sigma_s"] = sigma
        results["gaussian_rms_error"] = err
    except (DcPole, NoCutoffFound) as exc:
        error = f"{type(exc).__name__}: {exc}"
    if args.paper_eq11 and "cutoff_hz" in results:
        results["discrepancy"] = {
            "published_cutoff_hz": PUBLISHED_CUTOFF_HZ,
            "published_phase_deg": PUBLISHED_PHASE_DEG,
            "computed_cutoff_hz": results["cutoff_hz"],
            "computed_phase_deg": results["phase_at_cutoff_deg"],
            "note": (
                "DISCREPANCY: the published coefficients give a -3 dB cutoff of "
                f"{results['cutoff_hz']:.4g} Hz and {results['phase_at_cutoff_deg']:.4g} deg, "
                f"not the published {PUBLISHED_CUTOFF_HZ} Hz / {PUBLISHED_PHASE_DEG:g} deg"
            ),
        }
    _report(args, argv, digest, results, warns, error)
    if error:
        print(error, file=sys.stderr)
        return 1
    return 0


def cmd_sallen_key(args, argv):
    if args.poles is None:
        pairs = synth.load_pole_table()
        digest = _digest(synth.format_pole_table(pairs))
    else:
        text = _read_text(args.poles)
        pairs = synth.parse_pole_table(text)
        digest = _digest(text)
    if len(pairs) > 4:
        raise UsageError(f"pole table has {len(pairs)} pairs; at most 4 stages are supported")
    stages = [synth.design_sallen_key_stage(w, q, args.c2) for w, q in pairs]
    sweep = None
    if args.fstart is not None or args.fstop is not None:
        if args.fstart is None or args.fstop is None:
            raise UsageError("give both --fstart and --fstop")
        sweep = AcSweep(args.ppd, args.fstart, args.fstop)
    c = synth.build_sallen_key_cascade(stages, sweep)
    if args.memristor:
        params = _memristor_params(args)
        try:
            c = synth.substitute_memristors(c, params)
        except synth.OutOfRange as exc:
            stage = exc.name[1:-1]
            raise synth.OutOfRange(f"stage {stage} {exc.name}", exc.value, params) from None
    sol = mna.ac_sweep(c)
    header, rows, results, warns = _ac_rows_and_results(c, sol)
    out = c.probes[0]
    resp = sol.response(out)
    f_top = resp.freqs[-1]
    results = {
        "order": 2 * len(stages),
        "memristors": bool(args.memristor),
        "stages": [
            {"omega0": s.omega0, "q": s.q_factor, "r1": s.r1, "r2": s.r2, "c1": s.c1, "c2": s.c2}
            for s in stages
        ],
        "output": results[out],
        "top_decade_slope_db_per_decade": resp.slope_db_per_decade(f_top / 10.0, f_top),
        "kcl_residual_rel": mna.kcl_residual(c, sol, relative=True),
    }
    _write_csv(args.out, header, rows)
    _report(args, argv, digest, results, warns)
    return 0


def cmd_fit(args, argv):
    if args.csv is None:
        points = regression.table1_dataset()
        digest = _digest(regression.dataset_to_csv(points))
    else:
        text = _read_text(args.csv)
        points = regression.dataset_from_csv(text)
        digest = _digest(text)
    fit = regression.log_fit(points)
    table = [
        {
            "f_khz": p.f_khz,
            "mag_db": p.mag_db,
            "predicted_db": regression.fit_predict(fit, p.f_khz),
            "residual_db": r,
        }
        for p, r in zip(points, regression.residuals(fit, points))
    ]
    results = {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "rss": fit.rss,
        "n": fit.n,
        "residuals": table,
    }
    if args.csv is None:
        results["published"] = {
            "slope": regression.PUBLISHED_SLOPE,
            "intercept": regression.PUBLISHED_INTERCEPT,
        }
    _report(args, argv, digest, results, [])
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memgauss", description="Memristor / Gaussian-filter circuit workbench"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate a netlist")
    p.add_argument("netlist")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("ac", help="AC sweep of a netlist")
    p.add_argument("netlist", nargs="?")
    p.add_argument("--builtin", choices=["ladder"], help="use a built-in circuit")
    p.add_argument("-o", "--out", help="CSV output path")
    p.set_defaults(func=cmd_ac)

    p = sub.add_parser("tran", help="transient simulation of a netlist")
    p.add_argument("netlist", nargs="?")
    p.add_argument("--method", choices=["trapezoidal", "backward_euler"], default="trapezoidal")
    p.add_argument("-o", "--out", help="CSV output path")
    p.set_defaults(func=cmd_tran)

    p = sub.add_parser("hysteresis", help="sine-driven memristor i-v loops")
    p.add_argument("--amplitude", type=_si_value, default=1.0, help="drive amplitude (V)")
    p.add_argument("--freq", type=_float_list, default=[1.0], help="drive frequencies, comma-separated (Hz)")
    p.add_argument("--cycles", type=int, default=3)
    p.add_argument("--steps-per-cycle", type=int, default=2000)
    p.add_argument("--w0", type=float, default=0.5, help="initial doped fraction w/d")
    _add_memristor_flags(p)
    p.add_argument("-o", "--out", help="CSV output path")
    p.set_defaults(func=cmd_hysteresis)

    p = sub.add_parser("tf", help="analyze a rational transfer function")
    p.add_argument("--num", type=_float_list, help="numerator, ascending powers of s")
    p.add_argument("--den", type=_float_list, help="denominator, ascending powers of s")
    p.add_argument("--paper-eq11", action="store_true", help="use the published 4th-order approximant")
    p.add_argument("--fstart", type=_si_value, default=0.01)
    p.add_argument("--fstop", type=_si_value, default=10.0)
    p.add_argument("--ppd", type=int, default=50, help="points per decade")
    p.add_argument("-o", "--out", help="CSV output path")
    p.set_defaults(func=cmd_tf)

    p = sub.add_parser("sallen-key", help="Sallen-Key cascade from a pole table")
    p.add_argument("--poles", help="pole table ('omega0 q' per line); default: 8th-order Bessel")
    p.add_argument("--c2", type=_si_value, default=4.7e-6, help="grounded capacitor per stage (F)")
    p.add_argument("--memristor", action="store_true", help="replace resistors by memristors")
    _add_memristor_flags(p)
    p.add_argument("--fstart", type=_si_value)
    p.add_argument("--fstop", type=_si_value)
    p.add_argument("--ppd", type=int, default=20, help="points per decade")
    p.add_argument("-o", "--out", help="CSV output path")
    p.set_defaults(func=cmd_sallen_key)

    p = sub.add_parser("fit", help="log fit of the tabulated ladder response")
    p.add_argument("csv", nargs="?", help="freq_khz,mag_db CSV (default: built-in table)")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "ppd", 1) is not None and getattr(args, "ppd", 1) < 1:
            raise UsageError("--ppd must be >= 1")
        if (
            getattr(args, "fstart", None) is not None
            and getattr(args, "fstop", None) is not None
            and not 0 < args.fstart < args.fstop
        ):
            raise UsageError("need 0 < --fstart < --fstop")
        return args.func(args, argv)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MemgaussError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
