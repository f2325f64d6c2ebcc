"""Command-line interface.

Subcommands: monitor, eval, bench, mem, gen benign|malicious,
synth pltl|dfa|mm.  Exit codes: 0 success (no violation for `monitor`),
1 violations found, 2 usage or format error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import catalog as _catalog
from . import harness, learn_automata, learn_pltl, pltl, traces
from .automata import save_machine
from .sat import write_dimacs

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_USAGE = 2


def _load_alphabet(args) -> pltl.Alphabet:
    if getattr(args, "alphabet", None):
        alphabet, _, _ = traces.load_alphabet_file(args.alphabet)
        return alphabet
    if getattr(args, "layer", None):
        return _catalog.layer_alphabet(args.layer)
    raise SystemExit_usage("pass --alphabet FILE or --layer NAS|RRC")


def SystemExit_usage(message: str) -> SystemExit:
    print(f"error: {message}", file=sys.stderr)
    return SystemExit(EXIT_USAGE)


def _load_db(args) -> harness.SignatureDb:
    if args.db:
        return harness.load_db(args.db)
    return harness.default_db(getattr(args, "layer", None))


def _seed_sessions(args) -> list[traces.Session]:
    if args.sessions:
        pool: list[traces.Session] = []
        for skel in traces.parse_traces(args.sessions):
            pool.extend(skel.sessions)
        if not pool:
            raise SystemExit_usage(f"no sessions in {args.sessions}")
        return pool
    if args.layer:
        return _catalog.benign_seed_sessions(args.layer)
    raise SystemExit_usage("pass --sessions FILE or --layer NAS|RRC")


def _cmd_monitor(args) -> int:
    alphabet = _load_alphabet(args)
    db = _load_db(args)
    corpus = traces.parse_traces(args.trace)
    report = harness.run_monitors(db, corpus, alphabet, mode=args.mode,
                                  layer=args.layer)
    if args.format == "csv":
        print("trace,step,signature,kind,output")
        for v in report.verdicts:
            print(f"{v.trace_index},{v.step_index},{v.signature},{v.kind},{v.output or ''}")
    else:
        for v in report.verdicts:
            extra = f" output={v.output}" if v.output else ""
            print(f"trace {v.trace_index} step {v.step_index}: "
                  f"{v.signature} [{v.kind}]{extra}")
        flagged = report.flagged_traces
        print(f"{len(corpus)} traces, {len(report.verdicts)} verdicts, "
              f"{len(flagged)} traces flagged")
    return EXIT_VIOLATIONS if report.verdicts else EXIT_OK


def _cmd_eval(args) -> int:
    alphabet = _load_alphabet(args)
    db = _load_db(args)
    corpus = traces.parse_traces(args.trace)
    metrics = harness.evaluate(db, corpus, alphabet, mode=args.mode, layer=args.layer)
    if args.format == "csv":
        print("signature,attack,tp,fp,fn,tn,precision,recall,f1")
        for r in metrics.rows:
            print(f"{r.signature},{r.attack},{r.tp},{r.fp},{r.fn},{r.tn},"
                  f"{r.precision:.4f},{r.recall:.4f},{r.f1:.4f}")
    else:
        for r in metrics.rows:
            print(f"{r.signature} / {r.attack}: precision={r.precision:.3f} "
                  f"recall={r.recall:.3f} f1={r.f1:.3f} "
                  f"(tp={r.tp} fp={r.fp} fn={r.fn} tn={r.tn})")
    return EXIT_OK


def _cmd_bench(args) -> int:
    db = _load_db(args)
    corpus = traces.parse_traces(args.trace)
    alphabet = _load_alphabet(args) if (args.alphabet or args.layer) else None
    result = harness.bench_throughput(db, corpus, repeat=args.repeat,
                                      alphabet=alphabet, layer=args.layer)
    print(f"{result.messages} messages x {result.repeat} runs: "
          f"{result.mean_mps:,.1f} msg/s (sd {result.sd_mps:,.1f})")
    return EXIT_OK


def _cmd_mem(args) -> int:
    db = _load_db(args)
    report = harness.mem_report(db)
    for r in report.rows:
        params = " ".join(f"{k}={v}" for k, v in r.params.items())
        print(f"{r.name} [{r.kind}/{r.layer}] {params}: "
              f"structure={r.structure_bits}b state={r.state_bits}b "
              f"total={r.total_bits}b header={r.header_bytes}B")
    for layer in ("NAS", "RRC"):
        total = report.layer_total_bits(layer)
        if total:
            print(f"{layer} total: {total} bits")
    return EXIT_OK


def _cmd_gen(args) -> int:
    pool = _seed_sessions(args)
    if args.gen_kind == "benign":
        out = traces.gen_benign(pool, args.length, args.count, args.seed)
    else:
        cat = _catalog.load_catalog(args.catalog, layer=args.layer)
        try:
            out = traces.gen_malicious(pool, cat, args.attack, args.length,
                                       args.count, args.seed)
        except KeyError as exc:
            raise SystemExit_usage(str(exc))
    text = traces.write_traces_text(out)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {len(out)} traces to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _read_corpus(path, alphabet):
    return [traces.skeleton_to_trace(t, alphabet) for t in traces.parse_traces(path)]


def _cmd_synth_pltl(args) -> int:
    alphabet = _load_alphabet(args)
    positives = _read_corpus(args.pos, alphabet)
    negatives = _read_corpus(args.neg, alphabet)
    operators = learn_pltl.CORE_OPERATORS if args.core_operators else learn_pltl.DEFAULT_OPERATORS
    if args.dump_cnf:
        problem = learn_pltl.SynthesisProblem(
            positives, negatives, alphabet,
            max_size=args.max_size, operators=operators, semantics=args.semantics)
        encoding = learn_pltl.encode(problem, args.dump_cnf_size)
        write_dimacs(args.dump_cnf, encoding.cnf)
        print(f"wrote size-{args.dump_cnf_size} encoding to {args.dump_cnf}")
        return EXIT_OK
    try:
        ranked = learn_pltl.rank_candidates(
            positives, negatives, alphabet,
            k=args.candidates, holdout_fraction=args.holdout, seed=args.seed,
            max_size=args.max_size, timeout=args.timeout,
            operators=operators, semantics=args.semantics,
        )
    except learn_pltl.SynthesisTimeout as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not ranked:
        print("no consistent signature within the size bound", file=sys.stderr)
        return EXIT_USAGE
    for cand in ranked:
        print(f"size={cand.size} f1={cand.f1:.4f} {pltl.format_formula(cand.formula)}")
    return EXIT_OK


def _cmd_synth_dfa(args) -> int:
    pos = traces.parse_traces(args.pos)
    neg = traces.parse_traces(args.neg)
    sample = learn_automata.prep_dfa_sample(pos, neg)
    dfa = learn_automata.rpni(sample)
    if args.out:
        save_machine(args.out, dfa)
        print(f"wrote DFA ({dfa.num_states} states, {dfa.num_transitions} transitions) to {args.out}")
    else:
        from .automata import dfa_to_text
        sys.stdout.write(dfa_to_text(dfa))
    return EXIT_OK


def _cmd_synth_mm(args) -> int:
    pos = traces.parse_traces(args.pos)
    per_attack: dict[str, tuple[list, list]] = {}
    for spec in args.neg:
        name, _, path = spec.partition("=")
        if not path:
            raise SystemExit_usage("--neg expects NAME=FILE")
        per_attack[name] = (pos, traces.parse_traces(path))
    sample = learn_automata.prep_mm_sample(per_attack, label_position=args.label_position)
    mm = learn_automata.rpni_mealy(sample)
    if args.out:
        save_machine(args.out, mm)
        print(f"wrote Mealy machine ({mm.num_states} states, "
              f"{mm.num_transitions} transitions) to {args.out}")
    else:
        from .automata import mm_to_text
        sys.stdout.write(mm_to_text(mm))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phoenix",
        description="Monitor cellular control-plane traces against behavioral "
                    "signatures, and synthesize signatures from samples.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, db=True):
        if db:
            p.add_argument("--db", help="signature database file (default: built-in)")
        p.add_argument("--alphabet", help="alphabet file")
        p.add_argument("--layer", choices=("NAS", "RRC"),
                       help="restrict to one layer / use its built-in alphabet")
        p.add_argument("--format", choices=("text", "csv"), default="text")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("monitor", help="run signatures over a trace file")
    common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--mode", choices=("stop-first", "report-all"), default="stop-first")
    p.set_defaults(func=_cmd_monitor)

    p = sub.add_parser("eval", help="precision/recall/F1 over a labeled corpus")
    common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--mode", choices=("stop-first", "report-all"), default="stop-first")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="messages/second throughput")
    common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--repeat", type=int, default=5)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("mem", help="lower-bound memory report")
    common(p)
    p.set_defaults(func=_cmd_mem)

    gen = sub.add_parser("gen", help="generate benign or malicious traces")
    gsub = gen.add_subparsers(dest="gen_kind", required=True)
    for kind in ("benign", "malicious"):
        p = gsub.add_parser(kind)
        p.add_argument("--sessions", help="seed session file (default: built-in pool)")
        p.add_argument("--layer", choices=("NAS", "RRC"))
        p.add_argument("--length", type=int, default=5, help="sessions per trace")
        p.add_argument("--count", type=int, required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out")
        if kind == "malicious":
            p.add_argument("--attack", required=True)
            p.add_argument("--catalog", help="directory of extra variant files")
        p.set_defaults(func=_cmd_gen)

    synth = sub.add_parser("synth", help="synthesize a signature from samples")
    ssub = synth.add_subparsers(dest="synth_kind", required=True)

    p = ssub.add_parser("pltl")
    p.add_argument("--pos", required=True, help="benign trace file")
    p.add_argument("--neg", required=True, help="attack trace file")
    p.add_argument("--alphabet")
    p.add_argument("--layer", choices=("NAS", "RRC"))
    p.add_argument("--max-size", type=int, default=12)
    p.add_argument("--candidates", type=int, default=5)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--semantics", choices=("global", "final"), default="global")
    p.add_argument("--core-operators", action="store_true",
                   help="drop the once/historically operators from the menu")
    p.add_argument("--dump-cnf", help="write the CNF encoding to FILE and exit")
    p.add_argument("--dump-cnf-size", type=int, default=1)
    p.set_defaults(func=_cmd_synth_pltl)

    p = ssub.add_parser("dfa")
    p.add_argument("--pos", required=True)
    p.add_argument("--neg", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_synth_dfa)

    p = ssub.add_parser("mm")
    p.add_argument("--pos", required=True, help="benign trace file")
    p.add_argument("--neg", action="append", required=True,
                   metavar="NAME=FILE", help="attack traces, repeatable")
    p.add_argument("--label-position", choices=("final", "all"), default="final")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_synth_mm)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (traces.TraceFormatError, harness.DbFormatError,
            learn_automata.SampleConflictError, pltl.ParseError,
            FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
