"""Command-line front end.

Exit codes: 0 success, 2 grammar error, 3 generation fault, 4 input mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import assets
from .automaton import RegexError, compile_regex
from .automaton.compile import STATE_BUDGET_ENV
from .metrics.report import compare_table, csv_rows, efficiency, evaluate
from .metrics.text import KernelParams
from .record import RecordWriter, load_record, pattern_digest
from .sources import LogitSourceFault, TableSource, parse_source
from .steering import GenerationFault, SteeringParams, config_snapshot, generate_batch
from .vocab import Vocabulary, build_index

EXIT_OK = 0
EXIT_GRAMMAR = 2
EXIT_GENERATION = 3
EXIT_MISMATCH = 4

log = logging.getLogger("steerex")

GENERATE_DEFAULTS = {
    "prompt": "",
    "mode": "diverse",
    "n": 1000,
    "beta": 3.0,
    "gamma": 0.5,
    "temperature": 1.0,
    "max_tokens": 18,
    "seed": 0,
    "source": "uniform",
    "no_reward": False,
    "no_penalty": False,
    "no_range": False,
    "timeout": 30.0,
    "retries": 2,
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        self.code = code
        super().__init__(message)


def read_pattern(spec: str) -> str:
    """Pattern text from ``builtin:NAME`` or a file (trailing newline dropped)."""
    if spec.startswith(assets.BUILTIN_PREFIX):
        return assets.grammar(spec[len(assets.BUILTIN_PREFIX):])
    return Path(spec).read_text(encoding="utf-8").rstrip("\n")


def read_vocab(spec: str) -> Vocabulary:
    if spec.startswith(assets.BUILTIN_PREFIX):
        return assets.load_vocab(spec[len(assets.BUILTIN_PREFIX):])
    return Vocabulary.load(spec)


def _pattern_arg(args) -> str:
    if getattr(args, "regex", None) is not None:
        return args.regex
    if not args.pattern:
        raise CliError("a pattern is required (--pattern FILE, builtin:NAME, or --regex TEXT)", EXIT_MISMATCH)
    return read_pattern(args.pattern)


def _compile(pattern: str):
    try:
        return compile_regex(pattern)
    except RegexError as exc:
        raise CliError(exc.caret() if exc.pattern else str(exc), EXIT_GRAMMAR) from exc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_compile(args) -> int:
    dfa = _compile(_pattern_arg(args))
    counts = dfa.transition_counts()
    stats = {
        "states": dfa.num_states,
        "live": len(dfa.live),
        "dead": len(dfa.dead),
        "accepting": len(dfa.accepting),
        "symbol_transitions": {
            "live_to_live": counts["live_to_live"],
            "live_source": counts["live_source"],
            "complete": counts["complete"],
        },
        "state_bigrams": len(dfa.state_bigrams(live_source=True)),
    }
    if args.json:
        print(json.dumps(stats, indent=2))
    else:
        print(f"states            {stats['states']} ({stats['live']} live, {stats['dead']} dead)")
        print(f"accepting         {stats['accepting']}")
        print(f"transitions       {counts['live_to_live']} live-to-live, "
              f"{counts['live_source']} live-source, {counts['complete']} complete")
        print(f"state bigrams     {stats['state_bigrams']}")
    if args.export:
        Path(args.export).write_text(json.dumps(dfa.to_json()) + "\n")
    return EXIT_OK


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    doc = json.loads(Path(path).read_text())
    return {k.replace("-", "_"): v for k, v in doc.items()}


def resolve_generate_args(args) -> dict:
    """Flags override config-file values, which override built-in defaults."""
    resolved = dict(GENERATE_DEFAULTS)
    config = _load_config(args.config)
    unknown = set(config) - set(GENERATE_DEFAULTS) - {"pattern", "vocab", "out", "regex"}
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}", EXIT_MISMATCH)
    resolved.update(config)
    for key in list(GENERATE_DEFAULTS) + ["pattern", "vocab", "out", "regex"]:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def cmd_generate(args) -> int:
    cfg = resolve_generate_args(args)
    for key in ("vocab", "out"):
        if not cfg.get(key):
            raise CliError(f"--{key} is required", EXIT_MISMATCH)
    ns = argparse.Namespace(pattern=cfg.get("pattern"), regex=cfg.get("regex"))
    pattern = _pattern_arg(ns)
    dfa = _compile(pattern)
    vocab = read_vocab(cfg["vocab"])
    if cfg["n"] < 1:
        raise CliError("n must be at least 1", EXIT_MISMATCH)
    params = SteeringParams(
        beta=cfg["beta"], gamma=cfg["gamma"], temperature=cfg["temperature"],
        max_tokens=cfg["max_tokens"], mode=cfg["mode"],
        use_reward=not cfg["no_reward"], use_penalty=not cfg["no_penalty"], use_range=not cfg["no_range"],
    )
    index = build_index(dfa, vocab)
    for msg in index.diagnostics:
        print(f"warning: {msg}", file=sys.stderr)
    try:
        source = parse_source(cfg["source"], len(vocab), vocab.digest(), timeout=cfg["timeout"], retries=cfg["retries"])
    except LogitSourceFault as exc:
        raise CliError(f"logit source startup failed: {exc}", EXIT_GENERATION) from exc
    except (ValueError, OSError) as exc:
        raise CliError(str(exc), EXIT_MISMATCH) from exc

    config = config_snapshot(
        params,
        seed=cfg["seed"],
        prompt=cfg["prompt"],
        n=cfg["n"],
        source=cfg["source"],
        pattern=pattern,
        pattern_hash=pattern_digest(pattern),
        vocab_hash=vocab.digest(),
    )
    with open(cfg["out"], "w", encoding="utf-8") as fh:
        writer = RecordWriter(fh, config)
        try:
            record = generate_batch(
                source, dfa, index, params, cfg["prompt"], cfg["n"], cfg["seed"],
                config=config, on_sample=writer.write,
            )
        except GenerationFault as exc:
            raise CliError(f"generation fault: {exc} (partial record kept in {cfg['out']})", EXIT_GENERATION) from exc
    eff = efficiency(record)
    print(f"samples {len(record.samples)}  valid {record.valid_fraction:.4f}  tps {eff['tps']:.1f}")
    if args.export_counter:
        Path(args.export_counter).write_text(json.dumps(record.counter.to_json()) + "\n")
    return EXIT_OK


def _check_pattern(record, pattern: str, label: str) -> None:
    recorded = record.config.get("pattern_hash")
    if recorded != pattern_digest(pattern):
        raise CliError(f"{label}: record was generated for a different pattern "
                       f"(record {recorded}, given {pattern_digest(pattern)})", EXIT_MISMATCH)


def _kernel(args) -> KernelParams:
    return KernelParams(degree=args.kernel_degree, shift=args.kernel_shift)


def cmd_evaluate(args) -> int:
    pattern = _pattern_arg(args)
    dfa = _compile(pattern)
    record = load_record(args.record)
    _check_pattern(record, pattern, args.record)
    if not record.samples:
        print("warning: record has no samples", file=sys.stderr)
    report = evaluate(record, dfa, _kernel(args))
    text = csv_rows({Path(args.record).stem: report}) if args.csv else json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    pattern = _pattern_arg(args)
    dfa = _compile(pattern)
    rec_a, rec_b = load_record(args.record_a), load_record(args.record_b)
    if rec_a.config.get("pattern_hash") != rec_b.config.get("pattern_hash"):
        raise CliError("records were generated for different patterns", EXIT_MISMATCH)
    _check_pattern(rec_a, pattern, args.record_a)
    kernel = _kernel(args)
    rep_a, rep_b = evaluate(rec_a, dfa, kernel), evaluate(rec_b, dfa, kernel)
    if args.csv:
        sys.stdout.write(csv_rows({Path(args.record_a).stem: rep_a, Path(args.record_b).stem: rep_b}))
    else:
        sys.stdout.write(compare_table(rep_a, rep_b, Path(args.record_a).stem, Path(args.record_b).stem))
        pct = efficiency(rec_b, rec_a).get("percentage", 0.0)
        log.debug("tps percentage %.2f", pct)
    return EXIT_OK


def cmd_assets(args) -> int:
    if args.name is None:
        for g in assets.GRAMMARS:
            print(f"grammar  builtin:{g}")
        for v in assets.VOCABS:
            print(f"vocab    builtin:{v}")
        return EXIT_OK
    if args.name in assets.GRAMMARS:
        print(assets.grammar(args.name))
    elif args.name in assets.VOCABS:
        sys.stdout.write(assets.vocab_path(args.name).read_text())
    else:
        raise CliError(f"unknown asset {args.name!r}", EXIT_MISMATCH)
    return EXIT_OK


def cmd_make_table(args) -> int:
    vocab = read_vocab(args.vocab)
    table = TableSource.random(len(vocab), args.seed, args.scale, eos=vocab.eos, eos_bias=args.eos_bias)
    Path(args.out).write_text(json.dumps(table.to_json()) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_pattern(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pattern", help="pattern file or builtin:NAME")
    p.add_argument("--regex", help="pattern text given inline")


def _add_kernel(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel-degree", type=int, default=3)
    p.add_argument("--kernel-shift", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steerex", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a pattern and print DFA statistics")
    _add_pattern(p)
    p.add_argument("--export", help="write the DFA as JSON")
    p.add_argument("--json", action="store_true", help="print statistics as JSON")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("generate", help="run a generation batch and write a JSONL record")
    _add_pattern(p)
    p.add_argument("--vocab", help="vocabulary file (.json or .tsv) or builtin:NAME")
    p.add_argument("--prompt")
    p.add_argument("--mode", choices=["baseline", "diverse"])
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-tokens", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--source", help="uniform | table:PATH | remote:URL")
    p.add_argument("--timeout", type=float, help="remote request timeout in seconds")
    p.add_argument("--retries", type=int, help="remote retry count")
    p.add_argument("--no-reward", action="store_true", default=None, help="ablation: reward = 0")
    p.add_argument("--no-penalty", action="store_true", default=None, help="ablation: penalty = 1")
    p.add_argument("--no-range", action="store_true", default=None, help="ablation: range = 1")
    p.add_argument("--out", help="output JSONL path")
    p.add_argument("--config", help="JSON file of option values (flags take precedence)")
    p.add_argument("--export-counter", help="write the final global transition counter as JSON")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="compute the metrics report for a record")
    p.add_argument("record")
    _add_pattern(p)
    _add_kernel(p)
    p.add_argument("--out")
    p.add_argument("--csv", action="store_true", help="emit a table row instead of JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="side-by-side metrics of two records")
    p.add_argument("record_a")
    p.add_argument("record_b")
    _add_pattern(p)
    _add_kernel(p)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("assets", help="list or print bundled grammars and vocabularies")
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_assets)

    p = sub.add_parser("make-table", help="write a seeded biased table source for a vocabulary")
    p.add_argument("--vocab", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=3.0, help="standard deviation of the random logits")
    p.add_argument("--eos-bias", type=float, default=0.0, help="offset added to the eos logit in every row")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_table)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if os.environ.get(STATE_BUDGET_ENV):
        log.debug("state budget from %s=%s", STATE_BUDGET_ENV, os.environ[STATE_BUDGET_ENV])
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
