"""Command-line entry points.

Exit codes for ``run``: 0 success, 2 config schema violation, 3 numeric
non-convergence (artifacts are still written, flagged rows listed), 4 I/O
failure.  ``verify`` re-checks acceptance predicates from the CSV artifacts
alone and exits 1 on any failed predicate.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .experiments import (EXPERIMENT_DESCRIPTIONS, atomic_write,
                          render_plots, run_experiment, write_result)
from .metrics import i_z_bounds_check

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_SCHEMA = 2
EXIT_NONCONVERGED = 3
EXIT_IO = 4


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        res = run_experiment(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    out = Path(cfg.output_dir)
    try:
        written = write_result(res, out)
        if cfg.plots:
            written += render_plots(res, out)
        summary = {
            "experiment": res.kind,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "checks": res.checks,
            "passed": res.passed,
            "flagged_rows": res.flagged,
            "info": res.info,
            "files": [p.name for p in written],
        }
        atomic_write(out / "summary.json",
                     json.dumps(summary, indent=2, default=str) + "\n")
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO
    for name, ok in res.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {res.kind}:{name}")
    if res.flagged:
        print(f"{len(res.flagged)} non-converged rows:", file=sys.stderr)
        for row in res.flagged:
            print(f"  {row}", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK if res.passed else EXIT_CHECK_FAILED


def cmd_list(_args) -> int:
    for kind, desc in EXPERIMENT_DESCRIPTIONS.items():
        print(f"{kind:10s} {desc}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify: predicate re-checks driven purely by the emitted CSVs
# ---------------------------------------------------------------------------

def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    lines = path.read_text().strip().split("\n")
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def _col(hdr, rows, name, cast=float):
    k = hdr.index(name)
    return [cast(r[k]) for r in rows]


def _verify_dir(out: Path) -> list[tuple[str, bool]]:
    checks: list[tuple[str, bool]] = []
    for p in sorted(out.glob("polar_L*.csv")):
        hdr, rows = _read_csv(p)
        zs = _col(hdr, rows, "Z")
        zse = _col(hdr, rows, "Z_stderr")
        iv = _col(hdr, rows, "I")
        ise = _col(hdr, rows, "I_stderr")
        ok = all(i_z_bounds_check(i, z, tol=6.0 * (sz + si) + 1e-9)
                 for z, sz, i, si in zip(zs, zse, iv, ise))
        checks.append((f"{p.name}:i_z_bounds", ok))
    p = out / "theorem4.csv"
    if p.exists():
        hdr, rows = _read_csv(p)
        status = _col(hdr, rows, "status", str)
        checks.append(("theorem4:no_violations", "violated" not in status))
    p = out / "fig3.csv"
    if p.exists():
        hdr, rows = _read_csv(p)
        gap = _col(hdr, rows, "gap")
        resid = _col(hdr, rows, "residual")
        yp = np.array(_col(hdr, rows, "output_pair_mi"))
        d = np.diff(yp)
        checks.append(("fig3:gap_positive", all(g > 0 for g in gap)))
        checks.append(("fig3:identity_residual",
                       max(abs(r) for r in resid) < 2e-3))
        checks.append(("fig3:output_pair_mi_non_monotone",
                       bool(len(d) > 1 and np.any(d[:-1] * d[1:] < 0))))
    p = out / "fig4.csv"
    if p.exists() and (out / "fig4_constants.csv").exists():
        hdr, rows = _read_csv(p)
        amps = _col(hdr, rows, "amplitude")
        t0 = np.array(_col(hdr, rows, "t0"))
        zgc = np.array(_col(hdr, rows, "zg_conditional"))
        ok_min = True
        for a in sorted(set(amps)):
            m = np.array([x == a for x in amps])
            k0 = int(np.argmin(np.abs(t0[m])))
            ok_min &= bool(np.argmin(zgc[m]) == k0)
        checks.append(("fig4:minimum_at_zero", ok_min))
        chd, crows = _read_csv(out / "fig4_constants.csv")
        zc = _col(chd, crows, "z_w")
        gz = _col(chd, crows, "zg_w")
        checks.append(("fig4:zg_below_z",
                       all(g < z for g, z in zip(gz, zc))))
    p = out / "rate_trend.csv"
    if p.exists():
        hdr, rows = _read_csv(p)
        frac = np.array(_col(hdr, rows, "fraction"))
        checks.append(("rate:fraction_nondecreasing",
                       bool(np.all(np.diff(frac) >= -1e-12))))
    p = out / "polarize_summary.csv"
    if p.exists():
        hdr, rows = _read_csv(p)
        avg = np.array(_col(hdr, rows, "avg_i"))
        se = np.array(_col(hdr, rows, "avg_i_stderr"))
        ok = bool(np.all(np.diff(avg) >= -3.0 * se[1:]))
        checks.append(("polarize:avg_i_nondecreasing", ok))
    p = out / "ber.csv"
    if p.exists():
        hdr, rows = _read_csv(p)
        dec = _col(hdr, rows, "decoder", str)
        ber = dict(zip(dec, _col(hdr, rows, "ber")))
        lo = dict(zip(dec, _col(hdr, rows, "ber_ci_lo")))
        hi = dict(zip(dec, _col(hdr, rows, "ber_ci_hi")))
        if {"memory_aware", "marginal"} <= set(ber):
            checks.append(("ber:memory_aware_lower",
                           ber["memory_aware"] < ber["marginal"]))
            checks.append(("ber:cis_disjoint",
                           hi["memory_aware"] < lo["marginal"]))
    return checks


def cmd_verify(args) -> int:
    out = Path(args.output_dir)
    if not out.is_dir():
        print(f"io error: {out} is not a directory", file=sys.stderr)
        return EXIT_IO
    try:
        checks = _verify_dir(out)
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, IndexError) as e:
        print(f"malformed artifact: {e}", file=sys.stderr)
        return EXIT_IO
    if not checks:
        print("no recognized artifacts found", file=sys.stderr)
        return EXIT_CHECK_FAILED
    ok_all = True
    for name, ok in checks:
        ok_all &= ok
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK if ok_all else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="polarmem",
        description="Polarization analysis for channels with Markov noise")
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to a YAML experiment config")
    p_run.set_defaults(fn=cmd_run)
    p_list = sub.add_parser("list-experiments",
                            help="list available experiment kinds")
    p_list.set_defaults(fn=cmd_list)
    p_ver = sub.add_parser("verify",
                           help="re-check predicates from emitted CSVs")
    p_ver.add_argument("output_dir")
    p_ver.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
