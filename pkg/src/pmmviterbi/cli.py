"""Command-line entry point ``pmmviterbi``.

Exit codes: 0 success, 1 zero likelihood or failed check, 2 usage or I/O
error, 3 guard violation.
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys
from pathlib import Path

from . import io as pio
from .conditions import check_all
from .dp import GuardError, TieRule, viterbi_path
from .experiments import RECIPES, run_experiment, to_csv
from .model import ModelError
from .nodes import falsify_barrier, find_cyclic_center, verify_barrier_prop21
from .online import BufferFull, DecoderConfig, OnlineDecoder, ZeroLikelihoodError
from .simulate import simulate

EXIT_OK, EXIT_DIAGNOSTIC, EXIT_USAGE, EXIT_GUARD = 0, 1, 2, 3


class Failure(Exception):
    def __init__(self, message: str, code: int = EXIT_DIAGNOSTIC):
        super().__init__(message)
        self.code = code


@contextlib.contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _observations(path: str, model):
    if path == "-":
        return pio.iter_observations(sys.stdin, model)
    if not Path(path).is_file():
        raise FileNotFoundError(f"observation file not found: {path}")
    return iter(pio.read_observations(path, model))


def _block(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad block {text!r}; use e.g. 1,1,2")


def cmd_simulate(args) -> int:
    model = pio.resolve_model(args.model)
    traj = simulate(model, args.steps, args.seed)
    with _output(args.out) as fh:
        pio.write_trajectory(fh, model, traj.observations, traj.hidden)
    return EXIT_OK


def _decode_offline(args, model) -> int:
    obs = list(_observations(args.obs, model))
    if not obs:
        return EXIT_OK
    res = viterbi_path(model, obs, tie=TieRule.parse(args.tie), exact=args.exact)
    if not res.ok:
        raise Failure(res.diagnostic)
    with _output(args.out) as fh:
        pio.write_decode(fh, res.path)
    diag = {"loglik": res.loglik, "ties_at_end": res.ties, "length": len(obs)}
    pio.dump_json(diag, sys.stderr)
    return EXIT_OK


def _decode_online(args, model) -> int:
    config = DecoderConfig(order=args.order, separation=args.sep, tie=TieRule.parse(args.tie),
                           require_strong=args.strong, max_buffer=args.max_buffer,
                           overflow=args.overflow, exact=args.exact)
    dec = OnlineDecoder(model, config)
    with _output(args.out) as fh:
        fh.write("t,v\n")
        try:
            for x in _observations(args.obs, model):
                for t, v in dec.push(x):
                    fh.write(f"{t},{v}\n")
                fh.flush()
        except ZeroLikelihoodError as exc:
            pio.dump_json({"error": str(exc), "diagnostics": dec.diagnostics}, sys.stderr)
            raise Failure(str(exc))
        except BufferFull as exc:
            pio.dump_json({"error": str(exc), "diagnostics": dec.diagnostics}, sys.stderr)
            raise Failure(str(exc))
        result = dec.flush()
        for t, v in result.tail:
            fh.write(f"{t},{v}\n")
    pio.dump_json({
        "committed": len(dec.committed),
        "provisional_from": len(dec.committed) + 1,
        "loglik": result.total_loglik,
        "committed_loglik": dec.committed_loglik,
        "diagnostics": result.diagnostics,
    }, sys.stderr)
    return EXIT_OK


def cmd_decode(args) -> int:
    model = pio.resolve_model(args.model)
    if args.online:
        return _decode_online(args, model)
    return _decode_offline(args, model)


def cmd_check(args) -> int:
    model = pio.resolve_model(args.model)
    reports = check_all(model, args.which)
    if not reports:
        raise Failure(f"no corollary applies to this model for --which {args.which}", EXIT_USAGE)
    overall = all(r.overall for r in reports.values())
    with _output(args.out) as fh:
        pio.dump_json({"overall": overall, "reports": reports}, fh)
    if args.strict_exit and not overall:
        return EXIT_DIAGNOSTIC
    return EXIT_OK


def cmd_barrier(args) -> int:
    model = pio.resolve_model(args.model)
    out: dict = {}
    if args.block is None:
        out["centers"] = find_cyclic_center(model, args.max_cycle_len, relabel=args.relabel)
        ok = bool(out["centers"])
    else:
        res = verify_barrier_prop21(model, args.block, args.split, exact=args.exact,
                                    state=args.state)
        out["result"] = res
        ok = hasattr(res, "reverify")
        if ok and args.falsify:
            cex = falsify_barrier(model, args.block, res.order, args.falsify, args.seed,
                                  state=args.state, exact=args.exact)
            out["counterexample"] = None if cex is None else {
                "trial": cex.trial, "observations": list(cex.observations),
                "block_start": cex.block_start, "t": cex.t, "order": cex.order}
            ok = cex is None
    with _output(args.out) as fh:
        pio.dump_json(out, fh)
    return EXIT_OK if ok or not args.strict_exit else EXIT_DIAGNOSTIC


def cmd_experiment(args) -> int:
    header, rows = run_experiment(args.name, args.seed, args.steps)
    with _output(args.out) as fh:
        fh.write(to_csv(header, rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmmviterbi",
                                description="Viterbi decoding and node analysis for pairwise Markov models.")
    sub = p.add_subparsers(dest="command", required=True)
    canon = ", ".join(pio.CANONICAL)

    s = sub.add_parser("simulate", help="sample a trajectory")
    s.add_argument("--model", required=True, help=f"model JSON path or one of: {canon}")
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("decode", help="offline or streaming Viterbi decoding")
    d.add_argument("--model", required=True)
    d.add_argument("--obs", default="-", help="observation CSV, '-' for standard input")
    d.add_argument("--tie", default="lex", choices=["lex", "colex"])
    d.add_argument("--exact", action="store_true", help="rational arithmetic (discrete models)")
    d.add_argument("--online", action="store_true")
    d.add_argument("--order", type=int, default=1)
    d.add_argument("--sep", type=int, default=None)
    d.add_argument("--strong", action="store_true")
    d.add_argument("--max-buffer", type=int, default=None)
    d.add_argument("--overflow", choices=["block", "force"], default="block")
    d.add_argument("--out", default="-")
    d.set_defaults(func=cmd_decode)

    c = sub.add_parser("check", help="check the sufficient conditions")
    c.add_argument("--model", required=True)
    c.add_argument("--which", choices=["hmm", "discrete", "glm", "all"], default="all")
    c.add_argument("--strict-exit", action="store_true", help="exit 1 unless every check passes")
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("barrier", help="certify a barrier block or search for cyclic centres")
    b.add_argument("--model", required=True)
    b.add_argument("--block", type=_block, default=None, help="comma separated symbols")
    b.add_argument("--split", type=int, default=2)
    b.add_argument("--state", type=int, default=1)
    b.add_argument("--exact", action="store_true")
    b.add_argument("--falsify", type=int, default=0, help="number of random embedding trials")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--max-cycle-len", type=int, default=4)
    b.add_argument("--relabel", action="store_true")
    b.add_argument("--strict-exit", action="store_true")
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_barrier)

    e = sub.add_parser("experiment", help="run a named recipe")
    e.add_argument("--name", required=True, choices=sorted(RECIPES))
    e.add_argument("--seed", type=int, default=1)
    e.add_argument("--steps", type=int, default=None, help="override the recipe length")
    e.add_argument("--out", default="-")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Failure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except GuardError as exc:
        print(f"guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (OSError, ValueError, KeyError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
