"""``coopcache`` command line: place, sweep, cluster, validate.

Exit codes: 0 ok, 1 configuration error, 2 model-validity error,
3 Monte Carlo validation failure.
"""

from __future__ import annotations

import argparse
import io
import sys
from contextlib import contextmanager

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import run_backhaul_sweep, run_cluster, run_place, run_sweep, run_validate
from .model import ModelValidityError
from .montecarlo import RNG_ALGORITHM, VALIDATION_HEADER
from .placement import write_placement
from .popularity import EmptyDistributionError, TraceParseError

EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_VALIDATION = 0, 1, 2, 3


def _r(x):
    return repr(float(x))


def _join(xs):
    return ";".join(_r(x) for x in xs)


def metadata(cfg: ExperimentConfig, command, notes=()):
    lines = [f"# coopcache {__version__} {command}"]
    lines += [f"# {k} = {v}" for k, v in cfg.items()]
    lines.append(f"# interference_extension = {cfg.interference_policy}: "
                 + ",".join(repr(float(x)) for x in cfg.interference_dbm(max(cfg.K, max(cfg.K_range)))))
    lines += [f"# {n}" for n in notes]
    return "\n".join(lines) + "\n"


def place_text(cfg):
    res, lib, net = run_place(cfg)
    buf = io.StringIO()
    summary = (f"scheme={res.scheme} hit={_r(res.hit_ratio)} omega={_join(res.omega.omega)} "
               f"phi={_join(res.allocation.phi)} tau={_join(res.tau.tau)} wireless_s={_r(res.delay.wireless_s)} "
               f"backhaul_s={_r(res.delay.backhaul_s)} delay_s={_r(res.delay.total_s)} "
               f"baseline_s={_r(res.baseline_s)} used={res.placement.used}")
    buf.write(metadata(cfg, "place"))
    buf.write(f"# summary: {summary}\n")
    write_placement(res, lib, buf)
    return buf.getvalue(), summary


def sweep_text(cfg):
    rows = run_sweep(cfg)
    notes = ["spectral_proxy = (sum_k omega_k / sqrt(tau_k))^-2 relative to the noncoop scheme at the same point",
             "omega and tau list ranks 1..K+1, separated by ';'"]
    out = [metadata(cfg, "sweep", notes),
           f"{cfg.sweep_var},scheme,hit_ratio,spectral_proxy,delay_s,wireless_s,backhaul_s,omega,tau\n"]
    for r in rows:
        v = r.value if isinstance(r.value, int) else _r(r.value)
        out.append(f"{v},{r.scheme},{_r(r.hit_ratio)},{_r(r.spectral_proxy)},{_r(r.delay_s)},"
                   f"{_r(r.wireless_s)},{_r(r.backhaul_s)},{_join(r.omega)},{_join(r.tau)}\n")
    return "".join(out)


def cluster_text(cfg):
    if cfg.D_BH_sweep_ms:
        rows = run_backhaul_sweep(cfg)
        Ks = [k for k, _ in rows[0].fixed]
        out = [metadata(cfg, "cluster", ["reduction = 1 - delay_opt_s / delay_K1_s"]),
               "D_BH_ms,K_opt,K_max,delay_opt_s,delay_K1_s,reduction,"
               + ",".join(f"fixed_K{k}_s" for k in Ks) + "\n"]
        for r in rows:
            out.append(f"{_r(r.D_BH_ms)},{r.K_opt},{r.K_max},{_r(r.delay_opt_s)},{_r(r.delay_K1_s)},"
                       f"{_r(r.reduction)}," + ",".join(_r(d) for _, d in r.fixed) + "\n")
        return "".join(out)
    rows, K_opt = run_cluster(cfg)
    out = [metadata(cfg, "cluster", [f"K_opt = {K_opt}",
                                     "admissibility_lhs_s is compared against the backhaul delay"]),
           "K,admissible,delay_s,admissibility_lhs_s\n"]
    out += [f"{r.K},{int(r.admissible)},{_r(r.delay_s)},{_r(r.lhs_s)}\n" for r in rows]
    return "".join(out)


def validate_text(cfg):
    rows = run_validate(cfg)
    out = [metadata(cfg, "validate", [f"rng = {RNG_ALGORITHM}, one stream per drop index",
                                      "check: bound_rate_bps <= simulated_rate_bps + 2 stderr_bps"]),
           VALIDATION_HEADER + "\n"]
    out += [r.csv() + "\n" for r in rows]
    return "".join(out), all(r.ok for r in rows), rows


@contextmanager
def _sink(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="flat key = value file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable; wins over the file)")
    common.add_argument("-o", "--output", default="-", help="output CSV path (default stdout)")

    ap = argparse.ArgumentParser(prog="coopcache", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("place", parents=[common], help="run one placement scheme and write c_f per file")
    sub.add_parser("sweep", parents=[common], help="metric curves over one swept variable")
    sub.add_parser("cluster", parents=[common], help="cluster-size study (set D_BH_sweep_ms for K_opt per D_BH)")
    sub.add_parser("validate", parents=[common], help="Monte Carlo check of the per-rank rate bound")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        status = EXIT_OK
        if args.command == "place":
            text, summary = place_text(cfg)
            print(summary, file=sys.stderr)
        elif args.command == "sweep":
            text = sweep_text(cfg)
        elif args.command == "cluster":
            text = cluster_text(cfg)
        else:
            text, ok, rows = validate_text(cfg)
            if not ok:
                bad = [f"lambda={r.csv().split(',')[0]} rank={r.rank}" for r in rows if not r.ok]
                print("bound violated beyond noise at " + ", ".join(bad), file=sys.stderr)
                status = EXIT_VALIDATION
    except (ConfigError, TraceParseError, EmptyDistributionError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelValidityError as err:
        print(f"model error: {err}", file=sys.stderr)
        return EXIT_MODEL
    with _sink(args.output) as fh:
        fh.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
