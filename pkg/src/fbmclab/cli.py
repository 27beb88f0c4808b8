"""Command-line front end.

Subcommands:
  sir           per-symbol signal, interference and SIR for one truncation case
  ber           Monte-Carlo BER curve of one scheme
  ofdm          Monte-Carlo BER of the CP-OFDM baseline
  se            spectral efficiency of the three overhead schemes
  dump-kernels  correlation and error kernels to a binary matrix container

CSV output (schema version 1) has one header row and one row per data point;
numbers use 12 significant digits.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

import numpy as np

from .analysis import CASES, SE_SCHEMES, sir_table, spectral_efficiency, with_case, filter_for
from .compensation import build_compensation
from .container import write_container
from .core_model import ConfigError, FbmcConfig, load_config
from .filter_bank import PAIRS, correlation_set, transfer_matrix
from .simulate import SCHEMES, ber_curve, ofdm_baseline

SCHEMA_VERSION = 1
SIR_COLUMNS = ("branch", "m", "signal_db", "interference_db", "sir_db")
BER_COLUMNS = ("scheme", "ebn0_db", "errors", "bits", "trials", "ber", "ci_low", "ci_high", "converged", "note")
SE_COLUMNS = ("scheme", "M", "K", "ebn0_db", "alpha", "eta", "factor", "overhead", "se", "sinr_db")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.12g" % v
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        return float("%.12g" % v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def render(columns, rows, fmt: str, meta: dict | None = None) -> str:
    if fmt == "json":
        doc = {"schema": SCHEMA_VERSION, **(meta or {}), "rows": [dict(zip(columns, map(_jsonable, r))) for r in rows]}
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(v) for v in r) + "\n")
    return buf.getvalue()


def _ber_rows(points):
    return [
        (p.scheme, p.ebn0_db, p.errors, p.bits, p.trials, p.ber, *p.wilson(), p.converged, p.note) for p in points
    ]


def parse_snr(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad SNR list {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty SNR list")
    return vals


def parse_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbmclab", description="MIMO-FBMC truncation and compensation analysis")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI configuration file (defaults apply when omitted)")
        sp.add_argument("--out", help="output file (standard output when omitted)")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    s = sub.add_parser("sir", help="per-symbol SIR table")
    common(s)
    s.add_argument("--case", choices=CASES, help="truncation case (default: the configured cut)")
    s.add_argument("--compensate", choices=("off", "genie", "dd"), default="off")

    for name in ("ber", "ofdm"):
        b = sub.add_parser(name, help="Monte-Carlo BER" if name == "ber" else "CP-OFDM baseline BER")
        common(b)
        b.add_argument("--snr", type=parse_snr, default=[0.0, 5.0, 10.0, 15.0, 20.0], help="comma list of Eb/N0 in dB")
        b.add_argument("--min-errors", type=int, default=200)
        b.add_argument("--min-trials", type=int, default=0)
        b.add_argument("--max-trials", type=int, default=2000)
        if name == "ber":
            b.add_argument("--case", choices=[c for c in SCHEMES if c != "ofdm"], default="same_length",
                           help="scheme: a truncation case or 'compensated'")
            b.add_argument("--compensate", choices=("off", "genie", "dd"))

    e = sub.add_parser("se", help="spectral efficiency")
    common(e)
    e.add_argument("--snr", type=parse_snr, default=[0.0, 10.0, 20.0, 30.0])
    e.add_argument("--block-lens", type=parse_ints, help="comma list of block sizes M (default: configured)")

    d = sub.add_parser("dump-kernels", help="write kernels to a binary container")
    common(d)
    d.add_argument("--case", choices=CASES)
    return p


def _progress(point):
    print(
        f"[{point.scheme}] Eb/N0 {point.ebn0_db:g} dB: {point.errors} errors / {point.bits} bits "
        f"in {point.trials} blocks" + ("" if point.converged else " (under-converged)"),
        file=sys.stderr,
    )


def _dump(cfg: FbmcConfig, out: str):
    filt = filter_for(cfg)
    M = cfg.block_len
    cs = correlation_set(filt, M, cfg.cut_front, cfg.cut_rear)
    rec = {"prototype": filt.coeffs, "prototype_q": filt.q_coeffs}
    for p in PAIRS:
        rec["g/" + "".join(p)] = cs.g[p]
        rec["delta_g/" + "".join(p)] = cs.delta[p]
    rec["transfer"] = transfer_matrix(filt, M, cfg.cut_front, cfg.cut_rear)
    cset = build_compensation(filt, cfg)
    rec["error"] = cset.error
    rec["self_matrix"] = cset.self_matrix
    rec["condition"] = cset.condition
    write_container(out, rec)


def cli_run(command: str, config_path: str | None = None, output_path: str | None = None, **opts) -> int:
    """Run one subcommand; returns the process exit status."""
    try:
        cfg = load_config(config_path) if config_path else FbmcConfig()
    except ConfigError as exc:
        print(f"fbmclab: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fbmclab: cannot read config: {exc}", file=sys.stderr)
        return 2
    if opts.get("seed") is not None:
        cfg = cfg.replace(seed=opts["seed"])
    fmt = opts.get("format", "csv")
    try:
        if command == "sir":
            if opts.get("case"):
                cfg = with_case(cfg, opts["case"])
            comp = opts.get("compensate", "off") != "off"
            rep = sir_table(cfg, comp)
            meta = {"K": rep.K, "M": rep.M, "cut_front": rep.cut_front, "cut_rear": rep.cut_rear, "compensated": comp}
            text = render(SIR_COLUMNS, rep.rows(), fmt, meta)
        elif command in ("ber", "ofdm"):
            snr = opts.get("snr") or [0.0, 5.0, 10.0, 15.0, 20.0]
            kw = dict(min_errors=opts.get("min_errors", 200), max_trials=opts.get("max_trials", 2000),
                      progress=_progress, min_trials=opts.get("min_trials", 0))
            if command == "ofdm":
                pts = ofdm_baseline(cfg, snr, **kw)
            else:
                pts = ber_curve(cfg, snr, scheme=opts.get("case") or "same_length", compensate=opts.get("compensate"), **kw)
            text = render(BER_COLUMNS, _ber_rows(pts), fmt, {"seed": cfg.seed})
        elif command == "se":
            rows = []
            for M in opts.get("block_lens") or [cfg.block_len]:
                for r in spectral_efficiency(cfg.replace(block_len=M), opts.get("snr") or [0.0, 10.0, 20.0, 30.0]):
                    rows.append((r.scheme, r.M, r.K, r.ebn0_db, r.alpha, r.eta, r.factor, r.overhead, r.se, r.sinr_db))
            text = render(SE_COLUMNS, rows, fmt, {"schemes": list(SE_SCHEMES)})
        elif command == "dump-kernels":
            if not output_path:
                print("fbmclab: dump-kernels needs --out", file=sys.stderr)
                return 2
            if opts.get("case"):
                cfg = with_case(cfg, opts["case"])
            _dump(cfg, output_path)
            return 0
        else:
            print(f"fbmclab: unknown command {command!r}", file=sys.stderr)
            return 2
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"fbmclab: {exc}", file=sys.stderr)
        return 1
    if output_path:
        with open(output_path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    opts = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out")}
    return cli_run(args.command, args.config, args.out, **opts)


if __name__ == "__main__":
    sys.exit(main())
