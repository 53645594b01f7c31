"""Command-line entry point.

Subcommands: forward, pal-demo, shatter, vc-bound, sweep, audit. Global
flags choose the precision mode (``--precision double`` or
``--precision bigfloat:N``), seed, and output directory. Every run that
produces files also writes a ``manifest.json`` next to them (relative paths,
no timestamps), and rerunning with an identical manifest produces
byte-identical outputs. Files are written atomically (temp + rename).

Exit codes: 0 success (or decision 0/1 under ``forward --exit-code``),
2 malformed spec/config, 3 invalid word or task/alphabet mismatch.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys
import tempfile

from . import __version__
from .construction import (
    build_palindrome_transformer,
    precision_failure_search,
    verify_exhaustive,
    verify_sampled,
    witnesses_to_csv,
)
from .experiments import TrainConfig, dimension_sweep, shatter_audit, sweep_to_csv
from .model import (
    InputError,
    SpecError,
    forward,
    forward_trace,
    spec_digest,
    spec_from_json,
)
from .numerics import BIGFLOAT, DOUBLE, PrecisionConfig
from .shattering import (
    DIV_PER_COORDINATE,
    DIV_SINGLE,
    comp_shatter_table,
    count_ops,
    sum2_shatter_table,
    table_summary,
    table_to_csv,
    vc_upper_bound,
)

EXIT_BAD_SPEC = 2
EXIT_BAD_INPUT = 3


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def parse_precision(text: str) -> PrecisionConfig:
    if text == DOUBLE:
        return PrecisionConfig.double()
    if text.startswith(BIGFLOAT + ":"):
        try:
            bits = int(text.split(":", 1)[1])
            return PrecisionConfig.bigfloat(bits)
        except ValueError as exc:
            raise CliError(f"bad precision spec {text!r}: {exc}", EXIT_BAD_SPEC)
    raise CliError(f"bad precision {text!r}; use double or bigfloat:N", EXIT_BAD_SPEC)


def atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(out_dir: str, subcommand: str, args: argparse.Namespace, outputs: list) -> None:
    manifest = {
        "tool": "softmaxlab",
        "version": __version__,
        "subcommand": subcommand,
        "precision": parse_precision(args.precision).to_json(),
        "seed": args.seed,
        "config": {
            k: v
            for k, v in sorted(vars(args).items())
            if k not in ("func", "out") and not k.startswith("_")
        },
        "outputs": sorted(outputs),
    }
    atomic_write(
        os.path.join(out_dir, "manifest.json"),
        json.dumps(manifest, sort_keys=True, indent=1) + "\n",
    )


def ensure_out(args) -> str:
    if not args.out:
        raise CliError("this subcommand requires --out DIR", EXIT_BAD_SPEC)
    os.makedirs(args.out, exist_ok=True)
    return args.out


def load_spec(path: str, cfg: PrecisionConfig):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read spec {path}: {exc}", EXIT_BAD_SPEC)
    try:
        return spec_from_json(doc, cfg)
    except SpecError as exc:
        raise CliError(f"malformed spec {path}: {exc}", EXIT_BAD_SPEC)


def parse_word(text: str) -> tuple:
    try:
        return tuple(int(tok) for tok in text.replace(",", " ").split())
    except ValueError as exc:
        raise CliError(f"bad word {text!r}: {exc}", EXIT_BAD_INPUT)


# -- subcommands -------------------------------------------------------------


def cmd_forward(args) -> int:
    cfg = parse_precision(args.precision)
    spec = load_spec(args.spec_file, cfg)
    word = parse_word(args.word)
    try:
        if args.trace:
            trace = forward_trace(spec, word)
            bit = trace["decision"]
        else:
            trace = None
            bit = forward(spec, word)
    except InputError as exc:
        raise CliError(str(exc), EXIT_BAD_INPUT)
    print(bit)
    if trace:
        print(json.dumps(trace, indent=1))
    if args.out:
        out = ensure_out(args)
        outputs = ["decision.txt"]
        atomic_write(os.path.join(out, "decision.txt"), f"{bit}\n")
        if trace:
            outputs.append("trace.json")
            atomic_write(
                os.path.join(out, "trace.json"),
                json.dumps(trace, sort_keys=True, indent=1) + "\n",
            )
        write_manifest(out, "forward", args, outputs)
    return bit if args.exit_code else 0


def cmd_pal_demo(args) -> int:
    out = ensure_out(args)
    n = args.n
    if n % 2 or n < 2:
        raise CliError("pal-demo needs even n >= 2", EXIT_BAD_INPUT)
    cfg_low = parse_precision(args.bits_low)
    cfg_high = parse_precision(args.bits_high or f"bigfloat:{4 * n}")
    pspec = build_palindrome_transformer(n, base=args.base, cfg=cfg_high)
    if n <= args.exhaustive_limit:
        report = verify_exhaustive(pspec)
        mode = "exhaustive"
    else:
        report = verify_sampled(pspec, count=args.sample, seed=args.seed)
        mode = "sampled"
    witnesses = precision_failure_search([n], cfg_low, cfg_high, base=args.base, seed=args.seed)
    buf = io.StringIO()
    witnesses_to_csv(witnesses, buf)
    atomic_write(os.path.join(out, "witnesses.csv"), buf.getvalue())
    summary = {
        "n": n,
        "base": args.base,
        "verification": mode,
        "checked": report["checked"],
        "correct": report["correct"],
        "mismatch_words": ["".join(map(str, w)) for w, _, _ in report["mismatches"]],
        "precision_low": cfg_low.to_json(),
        "precision_high": cfg_high.to_json(),
        "witness_count": len(witnesses),
    }
    atomic_write(
        os.path.join(out, "summary.json"),
        json.dumps(summary, sort_keys=True, indent=1) + "\n",
    )
    write_manifest(out, "pal-demo", args, ["witnesses.csv", "summary.json"])
    print(f"correct: {report['correct']}/{report['checked']}")
    print(f"witnesses: {len(witnesses)}")
    return 0


def cmd_shatter(args) -> int:
    out = ensure_out(args)
    cfg = parse_precision(args.precision)
    spec = load_spec(args.spec_file, cfg)
    try:
        if args.task == "comp":
            table = comp_shatter_table(spec, _labelings_arg(args, spec.n - 1))
        else:
            table = sum2_shatter_table(spec, _labelings_arg(args, spec.n // 2))
    except SpecError as exc:
        raise CliError(str(exc), EXIT_BAD_INPUT)
    buf = io.StringIO()
    table_to_csv(table, buf)
    atomic_write(os.path.join(out, "table.csv"), buf.getvalue())
    oc = count_ops(spec.d, spec.mlp)
    summary = table_summary(table)
    summary.update(
        {
            "task": args.task,
            "W": oc.W,
            "t": oc.t,
            "vc_bound": vc_upper_bound(oc),
            "spec_digest": spec_digest(spec),
        }
    )
    atomic_write(
        os.path.join(out, "summary.json"),
        json.dumps(summary, sort_keys=True, indent=1) + "\n",
    )
    write_manifest(out, "shatter", args, ["table.csv", "summary.json"])
    print(json.dumps(summary, sort_keys=True))
    return 0


def _labelings_arg(args, count):
    import itertools
    import random as _random

    if args.mode == "exhaustive":
        return itertools.product((0, 1), repeat=count)
    rng = _random.Random(args.seed)
    return [
        tuple(rng.randint(0, 1) for _ in range(count)) for _ in range(args.sample)
    ]


def cmd_vc_bound(args) -> int:
    cfg = parse_precision(args.precision)
    spec = load_spec(args.spec_file, cfg)
    report = {"d": spec.d, "mlp_neurons": spec.mlp.hidden_neurons}
    for rule in (DIV_SINGLE, DIV_PER_COORDINATE):
        oc = count_ops(spec.d, spec.mlp, div_rule=rule)
        report[rule] = {"W": oc.W, "t": oc.t, "vc_bound": vc_upper_bound(oc)}
    print(json.dumps(report, sort_keys=True, indent=1))
    if args.out:
        out = ensure_out(args)
        atomic_write(
            os.path.join(out, "vc_bound.json"),
            json.dumps(report, sort_keys=True, indent=1) + "\n",
        )
        write_manifest(out, "vc-bound", args, ["vc_bound.json"])
    return 0


def cmd_sweep(args) -> int:
    out = ensure_out(args)
    try:
        with open(args.config_file) as fh:
            conf = json.load(fh)
        task = conf["task"]
        n = conf["n"]
        grid_d = conf["d_list"]
        grid_mlp = [tuple(m) for m in conf["mlp_list"]]
        base = TrainConfig(
            task=task,
            n=n,
            d=1,
            lr=conf.get("lr", 0.5),
            steps=conf.get("steps", 200),
            seed=conf.get("seed", args.seed),
            sample_size=conf.get("sample_size", 4096),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"bad sweep config: {exc}", EXIT_BAD_SPEC)
    result = dimension_sweep(task, n, grid_d, grid_mlp, base)
    buf = io.StringIO()
    sweep_to_csv(result, buf)
    atomic_write(os.path.join(out, "sweep.csv"), buf.getvalue())
    canon = json.dumps(conf, sort_keys=True, separators=(",", ":")).encode()
    meta = {
        "task": task,
        "n": n,
        "seed": base.seed,
        "lr": base.lr,
        "steps": base.steps,
        "precision": PrecisionConfig.double().to_json(),
        "config_digest": hashlib.sha256(canon).hexdigest(),
        "rows": len(result.rows),
    }
    atomic_write(
        os.path.join(out, "sweep_meta.json"),
        json.dumps(meta, sort_keys=True, indent=1) + "\n",
    )
    write_manifest(out, "sweep", args, ["sweep.csv", "sweep_meta.json"])
    print(f"rows: {len(result.rows)}")
    return 0


def cmd_audit(args) -> int:
    out = ensure_out(args)
    cfg = parse_precision(args.precision)
    spec = load_spec(args.spec_file, cfg)
    try:
        report = shatter_audit(spec, args.task, sample=args.sample, seed=args.seed)
    except SpecError as exc:
        raise CliError(str(exc), EXIT_BAD_INPUT)
    doc = report.to_json()
    doc["spec_digest"] = spec_digest(spec)
    atomic_write(
        os.path.join(out, "audit.json"), json.dumps(doc, sort_keys=True, indent=1) + "\n"
    )
    write_manifest(out, "audit", args, ["audit.json"])
    print(json.dumps(doc, sort_keys=True))
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softmaxlab",
        description="Single-layer softmax-attention expressivity lab",
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--precision",
        default=DOUBLE,
        help="double or bigfloat:N (mantissa bits); routes every numeric op",
    )
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output directory")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("forward", parents=[common], help="evaluate a spec on one word")
    p.add_argument("spec_file")
    p.add_argument("word", help="comma/space separated symbols, e.g. 1,0,0,1")
    p.add_argument("--trace", action="store_true", help="dump every intermediate")
    p.add_argument(
        "--exit-code", action="store_true", help="exit with the decision bit (0/1)"
    )
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser(
        "pal-demo", parents=[common], help="build + verify the palindrome recognizer"
    )
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--base", type=int, default=10)
    p.add_argument("--bits-low", default=DOUBLE, help="low-precision mode (default double)")
    p.add_argument("--bits-high", default=None, help="high-precision mode (default bigfloat:4n)")
    p.add_argument("--exhaustive-limit", type=int, default=16)
    p.add_argument("--sample", type=int, default=2000)
    p.set_defaults(func=cmd_pal_demo)

    p = sub.add_parser(
        "shatter", parents=[common], help="shatter table for a task's point set"
    )
    p.add_argument("spec_file")
    p.add_argument("--task", choices=["comp", "sum2"], required=True)
    p.add_argument("--mode", choices=["exhaustive", "sample"], default="exhaustive")
    p.add_argument("--sample", type=int, default=1000)
    p.set_defaults(func=cmd_shatter)

    p = sub.add_parser(
        "vc-bound", parents=[common], help="operation count and VC upper bound"
    )
    p.add_argument("spec_file")
    p.set_defaults(func=cmd_vc_bound)

    p = sub.add_parser("sweep", parents=[common], help="train a dimension grid")
    p.add_argument("config_file")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser(
        "audit", parents=[common], help="count labelings realized by a spec"
    )
    p.add_argument("spec_file")
    p.add_argument("--task", choices=["comp", "sum2"], required=True)
    p.add_argument("--sample", type=int, default=10_000)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    raise SystemExit(main())
