"""Command-line interface: ``obspart {validate,exact,sample,halt,infer,builtin}``.

Exit codes: 0 success, 1 validation violations (scenario or prior),
2 parse error, 3 runtime or usage error. Results go to stdout, diagnostics
to stderr. ``-`` as a file name reads standard input.
"""

from __future__ import annotations

import argparse
import json
import re
import sys

from . import dsl
from .dsl import InvalidPrior, ParseError
from .engine import ContractError, exact_distribution, mixture_distribution
from .inference import DataModelMismatch, build_model_matrix, counts_from_records, estimate_em, estimate_ls
from .rng import SeededGenerator
from .sampler import DegenerateStateError, fill_blanks, halt_trials, sample_batch
from .scenario import BUILTINS, Partition, check_partition, validate

OK, INVALID, PARSE, RUNTIME = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(RUNTIME, f"{self.prog}: {message}")


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise CliError(RUNTIME, f"cannot read {path}: {e.strerror}") from None


def _load_scenario(path: str, check: bool = True):
    text = _read(path)
    try:
        s = dsl.parse_scenario(text)
    except ParseError as e:
        raise CliError(PARSE, f"{path}: {e}") from None
    if check:
        bad = validate(s)
        if bad:
            raise CliError(INVALID, "\n".join(f"{path}: {v}" for v in bad))
    return s


def _load_prior(path: str, s):
    try:
        prior = dsl.parse_prior(_read(path))
    except ParseError as e:
        raise CliError(PARSE, f"{path}: {e}") from None
    except InvalidPrior as e:
        raise CliError(INVALID, f"{path}: {e}") from None
    for p in prior.weights:
        try:
            check_partition(p, s)
        except (KeyError, ValueError) as e:
            raise CliError(INVALID, f"{path}: {e.args[0]}") from None
    return prior


def _partition_arg(text: str, s) -> Partition:
    ids = [] if text.strip() in ("none", "", "{}") else [x.strip() for x in text.strip("{}").split(",")]
    try:
        return check_partition(ids, s)
    except (KeyError, ValueError) as e:
        raise CliError(RUNTIME, str(e.args[0])) from None


def _partition_list(text: str, s) -> list:
    if text == "all":
        return s.partitions()
    groups = re.findall(r"\{([^}]*)\}", text)
    if not groups:
        raise CliError(RUNTIME, f"cannot read partition list {text!r}; use e.g. '{{}},{{I}},{{I,II}}' or 'all'")
    return [_partition_arg(g, s) for g in groups]


def cmd_validate(args) -> int:
    s = _load_scenario(args.scenario, check=False)
    bad = validate(s)
    for v in bad:
        print(f"{args.scenario}: {v}", file=sys.stderr)
    return INVALID if bad else OK


def cmd_builtin(args) -> int:
    if args.name not in BUILTINS:
        raise CliError(RUNTIME, f"unknown built-in {args.name!r}; choose from {', '.join(sorted(BUILTINS))}")
    sys.stdout.write(dsl.emit_scenario(BUILTINS[args.name]()))
    return OK


def cmd_exact(args) -> int:
    s = _load_scenario(args.scenario)
    if (args.partition is None) == (args.prior is None):
        raise CliError(RUNTIME, "give exactly one of --partition or --prior")
    if args.partition is not None:
        dist = exact_distribution(s, _partition_arg(args.partition, s))
    else:
        dist = mixture_distribution(s, _load_prior(args.prior, s))
    sys.stdout.write(dist.to_tsv())
    return OK


def cmd_sample(args) -> int:
    s = _load_scenario(args.scenario)
    prior = _load_prior(args.prior, s)
    if args.rounds < 1:
        raise CliError(RUNTIME, "--rounds must be at least 1")
    batch = sample_batch(s, prior, args.seed, args.rounds, jobs=args.jobs)
    if args.uniformize:
        batch = fill_blanks(s, batch, args.seed)
    labels = [st.outcomes + ("-",) for st in s.steps]
    parts = [[sid for sid in s.step_ids if sid in p] for p in batch.partitions]
    out = sys.stdout
    for i in range(len(batch)):
        rec = {
            "round": int(batch.streams[i]),
            "outcomes": {sid: labels[k][batch.outcomes[i, k]] for k, sid in enumerate(s.step_ids)},
            "halted": bool(batch.halted[i]),
        }
        if args.record_partition:
            rec["partition"] = parts[batch.partition[i]]
        out.write(json.dumps(rec, ensure_ascii=False))
        out.write("\n")
    return OK


def cmd_halt(args) -> int:
    s = _load_scenario(args.scenario)
    if not s.halt_target:
        raise CliError(RUNTIME, f"{args.scenario}: scenario has no halt target")
    prior = _load_prior(args.prior, s)
    if args.max_rounds < 1 or args.trials < 1:
        raise CliError(RUNTIME, "--max-rounds and --trials must be at least 1")
    rounds = halt_trials(s, prior, args.seed, args.max_rounds, args.trials, jobs=args.jobs)
    done = [r for r in rounds if r is not None]
    summary = {
        "trials": args.trials,
        "maxRounds": args.max_rounds,
        "meanRounds": sum(done) / len(done) if done else None,
        "exhausted": len(rounds) - len(done),
        "rounds": rounds,
    }
    print(json.dumps(summary))
    return OK


def cmd_infer(args) -> int:
    s = _load_scenario(args.scenario)
    parts = _partition_list(args.partitions, s)
    records = []
    for n, line in enumerate(_read(args.data).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise CliError(PARSE, f"{args.data}: line {n}: {e.msg}") from None
    m = build_model_matrix(s, parts)
    counts = counts_from_records(s, records)
    est = estimate_ls if args.method == "ls" else estimate_em
    res = est(m, counts)
    if not res.identifiable:
        print("warning: partitions are not identifiable from outcome statistics", file=sys.stderr)
    print(res.to_json(s, parts))
    return OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="obspart", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("builtin", help="print a built-in scenario")
    p.add_argument("name")
    p.set_defaults(func=cmd_builtin)

    p = sub.add_parser("exact", help="exact outcome distribution as TSV")
    p.add_argument("scenario")
    p.add_argument("--partition", help="merged step ids, e.g. 'I,II', or 'none'")
    p.add_argument("--prior", help="prior file; prints the partition mixture")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("sample", help="simulate rounds as JSON lines")
    p.add_argument("scenario")
    p.add_argument("--prior", required=True)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--uniformize", action="store_true", help="fill blank outcomes uniformly")
    p.add_argument("--record-partition", action="store_true", help="include the drawn partition")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("halt", help="repeat rounds until the halt target occurs")
    p.add_argument("scenario")
    p.add_argument("--prior", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-rounds", type=int, required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_halt)

    p = sub.add_parser("infer", help="estimate partition weights from sampled data")
    p.add_argument("scenario")
    p.add_argument("--data", required=True)
    p.add_argument("--partitions", default="all", help="e.g. '{},{I},{II},{I,II}' or 'all'")
    p.add_argument("--method", choices=("em", "ls"), default="em")
    p.set_defaults(func=cmd_infer)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as e:
        print(str(e), file=sys.stderr)
        return e.code
    except (ContractError, DataModelMismatch, DegenerateStateError, ValueError, KeyError) as e:
        print(f"error: {e.args[0] if e.args else e}", file=sys.stderr)
        return RUNTIME


if __name__ == "__main__":
    sys.exit(main())
