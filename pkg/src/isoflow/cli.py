"""Command-line orchestration.

One verb per procedure; composition happens through files:

    synth       write a synthetic benchmark (embeddings, pairs, ranks, sentences)
    train-flow  fit the invertible calibration model by exact likelihood
    transform   map an embedding file through a trained flow
    baseline    apply SN / NATSV / SN+NATSV and write the result
    eval        graded similarity: cosine + Spearman (reported x100)
    eval-auc    binary entailment: cosine + AUC (reported x100)
    diagnose    bucket norms, k-NN statistics, spectrum, isotropy summaries
    lexical     similarity-vs-edit-distance correlations and scatter dump

Every subcommand is a pure function of its input files, flags, and seed;
reruns produce byte-identical artifacts. Exit codes: 0 success, 1
runtime/data error, 2 usage error. A JSON config file may supply defaults
for any flag (--config); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import baselines, diagnostics, evaluation
from . import flow as flowmod
from . import store, synth
from .errors import IsoflowError

METHODS = ("raw", "flow", "sn", "natsv", "sn+natsv")


class UsageError(Exception):
    """Invalid flag combination; maps to exit code 2."""


def _writeln(text=""):
    sys.stdout.write(text + "\n")


def _load_inputs(args, gold_style=None):
    emb = store.load_embeddings(args.embeddings)
    pairs = store.load_pairs(args.pairs, n_rows=emb.n_rows, gold_style=gold_style)
    return emb, pairs


def _apply_method(emb, args):
    method = args.method
    if method == "raw":
        return emb
    if method == "flow":
        if not args.model:
            raise UsageError("--method flow requires --model")
        model = flowmod.load_model(args.model)
        return flowmod.transform(emb, model)
    if method == "sn":
        out, _ = baselines.standard_normalize(emb)
        return out
    if method in ("natsv", "sn+natsv"):
        if args.k is None:
            raise UsageError(f"--method {method} requires --k")
        fn = baselines.natsv if method == "natsv" else baselines.sn_natsv
        return fn(emb, args.k)
    raise UsageError(f"unknown method {method!r}")


def _sweep_k(emb, args, gold_style):
    """Pick k in 1..20 maximizing validation Spearman for NATSV methods."""
    val_pairs = store.load_pairs(args.val_pairs, n_rows=emb.n_rows, gold_style=gold_style)
    fn = baselines.natsv if args.method == "natsv" else baselines.sn_natsv
    best_k, best_rho = None, -np.inf
    for k in range(1, min(20, emb.dim - 1) + 1):
        rho = evaluation.evaluate_similarity(fn(emb, k), val_pairs).value
        if rho > best_rho:
            best_k, best_rho = k, rho
    return best_k


def cmd_synth(args):
    cfg = synth.SynthConfig(
        n_sentences=args.n, latent_dim=args.latent_dim, observed_dim=args.observed_dim,
        condition_number=args.kappa, frequency_shift_strength=args.freq_shift,
        noise_std=args.noise_std, zipf_exponent=args.zipf, n_pairs=args.n_pairs,
        seed=args.seed, with_sentences=not args.no_sentences)
    data = synth.generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store.save_embeddings(out / "embeddings.embd", data.embeddings)
    store.save_pairs(out / "pairs.tsv", data.pairs)
    store.save_frequency(out / "freq.txt", data.frequency)
    if data.sentences is not None:
        store.save_sentences(out / "sentences.txt", data.sentences)
    _writeln(f"wrote benchmark ({cfg.n_sentences}x{cfg.observed_dim}, "
             f"{cfg.n_pairs} pairs) to {out}")
    return 0


def cmd_train_flow(args):
    emb = store.load_embeddings(args.embeddings)
    cfg = flowmod.TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                              batch_size=args.batch_size, seed=args.seed)
    arch = flowmod.ArchConfig(levels=args.levels, depth=args.depth,
                              width=args.width, coupling=args.coupling)
    result = flowmod.train(emb, cfg, arch)
    flowmod.save_model(args.out, result.model)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            for step, value in result.history:
                fh.write(f"{step}\t{value:.17g}\n")
    last = result.history[-1][1] if result.history else float("nan")
    _writeln(f"trained {len(result.history)} steps; final nll {last:.6f}; "
             f"model written to {args.out}")
    return 0


def cmd_transform(args):
    emb = store.load_embeddings(args.embeddings)
    model = flowmod.load_model(args.model)
    store.save_embeddings(args.out, flowmod.transform(emb, model))
    _writeln(f"wrote transformed embeddings to {args.out}")
    return 0


def cmd_baseline(args):
    emb = store.load_embeddings(args.embeddings)
    if args.method == "sn":
        out, _ = baselines.standard_normalize(emb)
    else:
        if args.k is None:
            raise UsageError(f"--method {args.method} requires --k")
        fn = baselines.natsv if args.method == "natsv" else baselines.sn_natsv
        out = fn(emb, args.k)
    store.save_embeddings(args.out, out)
    _writeln(f"wrote {args.method} embeddings to {args.out}")
    return 0


def _run_eval(args, gold_style, evaluator, label):
    emb, pairs = _load_inputs(args, gold_style)
    if args.sweep_k:
        if args.method not in ("natsv", "sn+natsv"):
            raise UsageError("--sweep-k applies only to NATSV methods")
        if not args.val_pairs:
            raise UsageError("--sweep-k requires --val-pairs")
        args.k = _sweep_k(emb, args, gold_style)
        _writeln(f"k\t{args.k}")
    calibrated = _apply_method(emb, args)
    report = evaluator(calibrated, pairs, keep_pairs=bool(args.dump))
    if args.dump:
        evaluation.dump_pairs(args.dump, report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(evaluation.report_lines(report))
    if args.machine:
        sys.stdout.write(evaluation.report_lines(report))
    else:
        _writeln(f"{label}\t{report.value * 100.0:.2f}")
    return 0


def cmd_eval(args):
    return _run_eval(args, "sts", evaluation.evaluate_similarity, "spearman_x100")


def cmd_eval_auc(args):
    return _run_eval(args, "binary", evaluation.evaluate_entailment, "auc_x100")


def cmd_diagnose(args):
    emb = store.load_embeddings(args.embeddings)
    spec = diagnostics.BucketSpec(tuple(args.buckets)) if args.buckets else diagnostics.BucketSpec()
    freq = store.load_frequency(args.freq) if args.freq else None
    report = diagnostics.build_report(emb, freq, spec, ks=args.k,
                                      neighbor_rule=args.neighbor_rule)
    lines = []
    if report.norm_buckets is not None:
        table = report.norm_buckets
        for label, count, mean in zip(table.labels, table.counts, table.means):
            lines.append(("norm", label, count, mean))
        for metric, tables in (("l2", report.knn_l2), ("dot", report.knn_dot)):
            for k, table in tables.items():
                for label, count, mean in zip(table.labels, table.counts, table.means):
                    lines.append((f"knn_{metric}_k{k}", label, count, mean))
    lines.append(("spectral_flatness", "-", emb.n_rows, report.spectral_flatness))
    lines.append(("mean_pairwise_cosine", "-", emb.n_rows, report.mean_pairwise_cosine))
    for i, value in enumerate(report.singular_values[: args.top_singular]):
        lines.append(("singular_value", str(i), emb.n_rows, float(value)))
    for name, label, count, value in lines:
        if args.machine:
            _writeln(f"{name}\t{label}\t{count}\t{value:.17g}")
        else:
            _writeln(f"{name}\t{label}\t{value:.6f}")
    return 0


def cmd_lexical(args):
    emb, pairs = _load_inputs(args)
    sentences = store.load_sentences(args.sentences)
    calibrated = _apply_method(emb, args)
    predicted = diagnostics.predicted_similarities(calibrated, pairs)
    report = diagnostics.lexical_correlation(sentences, pairs, predicted)
    if args.dump:
        diagnostics.dump_scatter(args.dump, report)
    rows = [("rho_predicted_edit", report.rho_predicted_edit),
            ("rho_gold_edit", report.rho_gold_edit),
            ("rho_predicted_gold", report.rho_predicted_gold)]
    for name, value in rows:
        if args.machine:
            _writeln(f"{name}\t{value:.17g}\t{len(pairs)}")
        else:
            _writeln(f"{name}_x100\t{value * 100.0:.2f}")
    return 0


def _int_list(text):
    return [int(part) for part in text.split(",") if part]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isoflow",
        description="Gaussian calibration of embedding spaces: invertible-flow "
                    "training, baselines, evaluation, and diagnostics.")
    parser.add_argument("--config", help="JSON file of flag defaults", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--latent-dim", type=int, default=16)
    p.add_argument("--observed-dim", type=int, default=32)
    p.add_argument("--kappa", type=float, default=100.0)
    p.add_argument("--freq-shift", type=float, default=1.5)
    p.add_argument("--noise-std", type=float, default=0.01)
    p.add_argument("--zipf", type=float, default=1.1)
    p.add_argument("--n-pairs", type=int, default=1000)
    p.add_argument("--no-sentences", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-flow", help="train the calibration flow")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=float, default=1.0)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--coupling", choices=("dense", "conv"), default="dense")
    p.add_argument("--log", default=None, help="write per-step nll as 'step<TAB>nll'")
    p.set_defaults(func=cmd_train_flow)

    p = sub.add_parser("transform", help="apply a trained flow to embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("baseline", help="apply SN / NATSV calibration")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--method", choices=("sn", "natsv", "sn+natsv"), required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    for name, func in (("eval", cmd_eval), ("eval-auc", cmd_eval_auc)):
        p = sub.add_parser(name, help=f"{name} a pair file against embeddings")
        p.add_argument("--embeddings", required=True)
        p.add_argument("--pairs", required=True)
        p.add_argument("--method", choices=METHODS, default="raw")
        p.add_argument("--model", default=None, help="flow model for --method flow")
        p.add_argument("--k", type=int, default=None, help="k for NATSV methods")
        p.add_argument("--sweep-k", action="store_true",
                       help="choose k in 1..20 on a validation split")
        p.add_argument("--val-pairs", default=None)
        p.add_argument("--machine", action="store_true", help="raw TSV output")
        p.add_argument("--out", default=None, help="write the machine report to a file")
        p.add_argument("--dump", default=None, help="write per-pair predictions")
        p.set_defaults(func=func)

    p = sub.add_parser("diagnose", help="anisotropy and frequency diagnostics")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--freq", default=None)
    p.add_argument("--buckets", type=_int_list, default=None,
                   help="comma-separated rank boundaries")
    p.add_argument("--k", type=_int_list, default=[3, 5, 7],
                   help="comma-separated k values for k-NN stats")
    p.add_argument("--neighbor-rule", choices=("l2", "dot"), default="l2")
    p.add_argument("--top-singular", type=int, default=8)
    p.add_argument("--machine", action="store_true")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("lexical", help="similarity vs edit-distance analysis")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--sentences", required=True)
    p.add_argument("--method", choices=METHODS, default="raw")
    p.add_argument("--model", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--dump", default=None, help="write the scatter TSV")
    p.add_argument("--machine", action="store_true")
    p.set_defaults(func=cmd_lexical)

    return parser


def _apply_config(parser, argv):
    """Seed subparser defaults from a JSON config, then reparse."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return parser.parse_args(argv)
    with open(known.config, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise UsageError("config file must hold a JSON object")
    fresh = build_parser()
    for action in fresh._subparsers._group_actions:
        for sub_parser in action.choices.values():
            known_dests = {a.dest for a in sub_parser._actions}
            sub_parser.set_defaults(**{k: v for k, v in config.items() if k in known_dests})
    return fresh.parse_args(argv)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (OSError, json.JSONDecodeError, UsageError) as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 2
    except IsoflowError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
