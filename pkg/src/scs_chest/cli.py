"""Command-line entry point.

    scs-chest run --config exp.json --out results.csv [--seed S] [--trials T] [--threads W]
    scs-chest probe-srip --L 8 --M 2 --Np 8 --s 2
    scs-chest coherence --Np 390 --M 32
    scs-chest selftest

Exit status is 0 on success, 1 for usage or configuration errors and 2 for
failures while running.
"""

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .errors import ConfigError, InvalidArgumentError, InvalidSpecError
from .pilots import PilotConfig, assemble_sensing, coherence_stats, srip_probe

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="override the configured seed")
    p.add_argument("--trials", type=_positive, default=None, help="override the trial count")
    p.add_argument("--threads", type=_positive, default=1, help="worker processes")


def build_parser():
    parser = _Parser(prog="scs-chest", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run a Monte-Carlo experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trial-log", default=None, help="write raw per-trial metrics (JSON lines)")
    p.add_argument("--timestamp", action="store_true", help="prepend a timestamp comment")
    _common(p)

    for name, hlp in (("probe-srip", "Monte-Carlo structured RIP estimate"),
                      ("coherence", "column coherence statistics of Psi")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--N", type=_positive, default=4096)
        p.add_argument("--Np", type=_positive, default=390)
        p.add_argument("--M", type=_positive, default=32)
        p.add_argument("--L", type=_positive, default=64)
        p.add_argument("--placement", choices=("uniform", "random"), default="uniform")
        _common(p)
        if name == "probe-srip":
            p.add_argument("--s", type=_positive, default=6, help="sparsity order")
        else:
            p.add_argument("--bins", type=_positive, default=20)

    p = sub.add_parser("selftest", help="noiseless toy instances against exhaustive search")
    _common(p)
    return parser


def _sensing(a):
    seed = 0 if a.seed is None else a.seed
    cfg = PilotConfig.from_seed(a.N, a.Np, a.M, seed, placement=a.placement)
    return assemble_sensing(cfg, a.L), seed


def _cmd_run(a):
    cfg = harness.load_config(a.config)
    changes = {k: getattr(a, k) for k in ("seed", "trials") if getattr(a, k) is not None}
    if changes:
        cfg = harness.validate(replace(cfg, **changes))
    records = harness.run(cfg, workers=a.threads, trial_log=a.trial_log)
    harness.emit_csv(records, a.out, timestamp=a.timestamp)
    print(f"wrote {len(records)} records to {a.out}")


def _cmd_probe(a):
    S, seed = _sensing(a)
    trials = a.trials or 1000
    delta = srip_probe(S, a.s, trials, np.random.default_rng(seed))
    print(f"delta_hat[s={a.s}] = {delta:.6f}  (L={a.L}, M={a.M}, Np={a.Np}, trials={trials})")


def _cmd_coherence(a):
    S, _ = _sensing(a)
    st = coherence_stats(S, bins=a.bins)
    print(f"mu_max = {st.mu_max:.6f} over {len(st.values)} column pairs")
    for lo, hi, c in zip(st.edges[:-1], st.edges[1:], st.counts):
        if c:
            print(f"  [{lo:.2f}, {hi:.2f})  {c}")


def _cmd_selftest(a):
    rep = harness.toy_selftest(trials=a.trials or 100, seed=0 if a.seed is None else a.seed)
    print(f"exact recovery {rep.exact}/{rep.trials}; "
          f"agrees with exhaustive search {rep.agree}/{rep.both}")
    return EXIT_OK if rep.ok else EXIT_RUNTIME


COMMANDS = {"run": _cmd_run, "probe-srip": _cmd_probe, "coherence": _cmd_coherence,
            "selftest": _cmd_selftest}


def main(argv=None):
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        code = COMMANDS[a.command](a)
    except ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidArgumentError, InvalidSpecError) as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if a.command == "run" and exc.filename == a.config else EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
