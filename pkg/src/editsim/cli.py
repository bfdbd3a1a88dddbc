"""Command-line surface tying the library into an experiment pipeline.

Subcommands cover the full workflow: train an edit model (train-transducer),
score pairs (prob, kernel), build and export kernel matrices (gram), learn
cost matrices (gesl), analyze similarity goodness (goodness), fit and apply
sparse linear classifiers (fit-linear, predict), run nearest-neighbor
baselines (knn), encode bitmaps (encode-freeman), and verify artifacts
(check). Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from editsim import (
    CostMatrix,
    MemorylessTransducer,
    baselines,
    costlearn,
    data,
    goodness,
    kernel,
    transducer,
)
from editsim.alphabet import Alphabet


class CliError(Exception):
    pass


def _parse_config(path) -> dict:
    """key=value per line; '#' comments. Values stay strings."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError("%s:%d: expected key=value" % (path, lineno))
            key, _, val = line.partition("=")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _load_items(args):
    ds = data.load_dataset(args.data, chars=args.chars)
    return ds


def _encode_with(alphabet: Alphabet, text: str, chars: bool):
    return alphabet.encode_chars(text) if chars else alphabet.encode(text)


def _resolve_measure(args, alphabet):
    """Build the measure selected by --measure plus its support flags."""
    name = args.measure
    if name in ("de", "ke", "klj") and not args.model:
        raise CliError("measure %r needs --model" % name)
    if name in ("kc", "edit") and not args.costs:
        raise CliError("measure %r needs --costs" % name)
    if name == "lev":
        return baselines.lev_measure()
    if name == "de":
        model = MemorylessTransducer.load_csv(args.model)
        return baselines.neglogprob_measure(model, args.direction)
    if name == "ke":
        model = MemorylessTransducer.load_csv(args.model)

        def func(x, y):
            return kernel.kernel_exact(model, x, y)

        return baselines.cached(baselines.Measure("ke", func, "similarity"))
    if name == "klj":
        model = MemorylessTransducer.load_csv(args.model)
        return baselines.sym_logprob_measure(model, args.t)
    if name == "knb":
        x0 = _encode_with(alphabet, args.zero_string, args.chars)
        return baselines.zero_string_measure(x0)
    if name == "kc":
        costs = CostMatrix.load_csv(args.costs)
        return baselines.cost_similarity_measure(costs)
    if name == "edit":
        costs = CostMatrix.load_csv(args.costs)
        return baselines.edit_distance_measure(costs)
    raise CliError("unknown measure %r" % name)


def _add_measure_flags(p):
    p.add_argument("--measure", default="lev",
                   choices=["lev", "de", "ke", "klj", "knb", "kc", "edit"])
    p.add_argument("--model", help="transducer CSV (for de/ke/klj)")
    p.add_argument("--costs", help="cost matrix CSV (for kc/edit)")
    p.add_argument("--zero-string", default="", help="anchor string for knb")
    p.add_argument("--t", type=float, default=1.0, help="exponent for klj")
    p.add_argument("--direction", default="query-to-train",
                   choices=["query-to-train", "train-to-query"],
                   help="conditional direction for de")
    p.add_argument("--normalize-measure", action="store_true",
                   help="rescale scores to [-1,1] on the dataset before use")


def _maybe_normalize(measure, args, items):
    measure = goodness.as_similarity(measure) if args.normalize_measure else measure
    if args.normalize_measure:
        strs = [s for _, s in items]
        pairs = [(strs[i], strs[j]) for i in range(len(strs))
                 for j in range(i + 1, len(strs))]
        measure = goodness.normalize_measure(measure, pairs)
    return measure


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="editsim",
        description="Stochastic edit models, marginal edit kernels, and "
        "edit similarity learning.",
    )
    ap.add_argument("--config", help="key=value defaults file")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("--chars", action="store_true",
                    help="treat strings as unseparated single-character tokens")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-transducer", help="EM-fit an edit model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="write per-iteration log-likelihood CSV")
    p.add_argument("--pair-strategy", default="random",
                   choices=["random", "levenshtein"])
    p.add_argument("--pairs-per-item", type=int, default=2)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--smoothing", type=float, default=1e-9)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("prob", help="conditional probability and -log for a pair")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)

    p = sub.add_parser("kernel", help="kernel value for one pair")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--mode", default="exact", choices=["exact", "approx"])
    p.add_argument("--landmarks", help="dataset file of landmark strings")

    p = sub.add_parser("gram", help="kernel matrix over a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", default="exact", choices=["exact", "approx"])
    p.add_argument("--landmarks")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", default="csv", choices=["csv", "precomputed"])

    p = sub.add_parser("gesl", help="learn an edit cost matrix from pairs")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--eta", type=float, default=0.1, help="threshold gap")
    p.add_argument("--strategy", default="levenshtein",
                   choices=["levenshtein", "random"])
    p.add_argument("--pairs-per-item", type=int, default=2)
    p.add_argument("--symmetric", action="store_true")

    p = sub.add_parser("goodness", help="margin-violation curve of a measure")
    _add_measure_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gamma-steps", type=int, default=101)

    p = sub.add_parser("fit-linear", help="fit sparse linear classifier(s)")
    _add_measure_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--multiclass", default="ova", choices=["ova", "ovo"])

    p = sub.add_parser("predict", help="classify a dataset with saved models")
    _add_measure_flags(p)
    p.add_argument("--model-file", required=True, help="fit-linear output")
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="write predictions TSV (default stdout)")

    p = sub.add_parser("knn", help="k-nearest-neighbor classification")
    _add_measure_flags(p)
    p.add_argument("--data", required=True, help="training dataset")
    p.add_argument("--queries", help="dataset of queries (default: --query)")
    p.add_argument("--query", help="one query string")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--out")

    p = sub.add_parser("encode-freeman", help="encode PBM bitmaps as chain codes")
    p.add_argument("inputs", nargs="+", help="PBM files")
    p.add_argument("--out", required=True)

    p = sub.add_parser("check", help="validate artifacts")
    p.add_argument("--model", help="transducer CSV to validate")
    p.add_argument("--psd", help="gram CSV to check for positive semidefiniteness")
    return ap


def _cmd_train_transducer(args) -> int:
    ds = _load_items(args)
    pair_set = costlearn.build_pairs(
        args.pair_strategy, ds.items, args.pairs_per_item, seed=args.seed
    )
    pairs = [
        (ds.items[i][1], ds.items[j][1])
        for i, j, same in pair_set.entries
        if same
    ]
    model, report = transducer.fit_em(
        pairs,
        transducer.uniform_init(ds.alphabet),
        max_iter=args.max_iter,
        tol=args.tol,
        smoothing=args.smoothing,
        threads=args.threads,
    )
    model.save_csv(args.out, {"smoothing": repr(args.smoothing), "seed": args.seed})
    if args.report:
        report.save_csv(args.report)
    print("trained on %d pairs; %d iterations; converged=%s"
          % (len(pairs), report.iterations, report.converged))
    return 0


def _cmd_prob(args) -> int:
    model = MemorylessTransducer.load_csv(args.model)
    x = _encode_with(model.alphabet, args.x, args.chars)
    y = _encode_with(model.alphabet, args.y, args.chars)
    p = transducer.cond_prob(model, x, y)
    d = transducer.dissimilarity(model, x, y)
    print("%s %s" % (repr(p), repr(d)))
    return 0


def _cmd_kernel(args) -> int:
    model = MemorylessTransducer.load_csv(args.model)
    x = _encode_with(model.alphabet, args.x, args.chars)
    y = _encode_with(model.alphabet, args.y, args.chars)
    if args.mode == "exact":
        value = kernel.kernel_exact(model, x, y)
    else:
        if not args.landmarks:
            raise CliError("approx mode needs --landmarks")
        lds = data.load_dataset(args.landmarks, chars=args.chars,
                                alphabet=model.alphabet)
        value = kernel.kernel_approx(model, x, y, lds.strings)
    print(repr(value))
    return 0


def _cmd_gram(args) -> int:
    model = MemorylessTransducer.load_csv(args.model)
    ds = data.load_dataset(args.data, chars=args.chars, alphabet=model.alphabet)
    landmarks = None
    if args.landmarks:
        landmarks = data.load_dataset(
            args.landmarks, chars=args.chars, alphabet=model.alphabet
        ).strings
    g = kernel.gram_matrix(
        model, ds.strings, mode=args.mode, landmarks=landmarks,
        normalize=args.normalize, threads=args.threads,
    )
    if args.format == "csv":
        kernel.save_gram_csv(g, args.out)
    else:
        kernel.export_precomputed(g, ds.labels, args.out)
    print("wrote %dx%d gram (%s) to %s" % (g.n, g.n, g.mode, args.out))
    return 0


def _cmd_gesl(args) -> int:
    ds = _load_items(args)
    pair_set = costlearn.build_pairs(
        args.strategy, ds.items, args.pairs_per_item, seed=args.seed
    )
    fit = costlearn.fit_costs(
        ds.items, pair_set, args.beta, args.eta, symmetric=args.symmetric
    )
    fit.save_csv(args.out, {"strategy": args.strategy, "seed": args.seed})
    print("objective %s; margin %s"
          % (repr(fit.objective), repr(costlearn.margin_from_gap(args.eta))))
    return 0


def _cmd_goodness(args) -> int:
    ds = _load_items(args)
    measure = _resolve_measure(args, ds.alphabet)
    args.normalize_measure = True  # curve needs scores in [-1, 1]
    measure = _maybe_normalize(measure, args, ds.items)
    curve = goodness.goodness_curve(
        measure, ds.items, np.linspace(0.0, 1.0, args.gamma_steps)
    )
    curve.save_csv(args.out)
    print("wrote curve with %d points to %s" % (len(curve.gammas), args.out))
    return 0


def _cmd_fit_linear(args) -> int:
    ds = _load_items(args)
    measure = _resolve_measure(args, ds.alphabet)
    measure = _maybe_normalize(baselines.cached(measure), args, ds.items)
    mm = goodness.fit_multiclass(measure, ds.items, args.lam, args.multiclass)
    with open(args.out, "w", newline="") as fh:
        fh.write("# lambda: %s\n" % repr(args.lam))
        fh.write("# measure: %s\n" % measure.name)
        fh.write("# strategy: %s\n" % mm.strategy)
        fh.write("# classes: %s\n" % " ".join(str(c) for c in mm.classes))
        writer = csv.writer(fh)
        writer.writerow(["model", "landmark_index", "landmark_string", "alpha"])
        for key, model in mm.models.items():
            tag = key if isinstance(key, str) else "%s|%s" % key
            for j, (lm, a) in enumerate(zip(model.landmarks, model.alphas)):
                if a != 0.0:
                    writer.writerow([tag, j, lm.text(), repr(float(a))])
    print("fitted %d model(s); total nonzero weights %d"
          % (len(mm.models), mm.sparsity))
    return 0


def _load_linear_models(path, measure, alphabet, chars: bool):
    strategy, classes = "ova", []
    rows = []
    with open(path, newline="") as fh:
        header = None
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                key, val = key.strip(), val.strip()
                if key == "strategy":
                    strategy = val
                elif key == "classes":
                    classes = val.split()
                continue
            for rec in csv.reader([line]):
                if header is None:
                    header = rec
                else:
                    rows.append(rec)
    models: dict = {}
    for tag, _, lm_text, alpha in rows:
        key = tuple(tag.split("|")) if "|" in tag else tag
        entry = models.setdefault(key, ([], []))
        entry[0].append(_encode_with(alphabet, lm_text, chars))
        entry[1].append(float(alpha))
    built = {}
    for key, (lms, alphas) in models.items():
        built[key] = goodness.SparseLinearModel(
            np.array(alphas), lms, 0.0, measure,
            diagnostics={"positive_label": key[0] if isinstance(key, tuple) else key},
        )
    return goodness.MulticlassModel(strategy, classes, built)


def _cmd_predict(args) -> int:
    ds = _load_items(args)
    measure = _resolve_measure(args, ds.alphabet)
    measure = _maybe_normalize(baselines.cached(measure), args, ds.items)
    mm = _load_linear_models(args.model_file, measure, ds.alphabet, args.chars)
    lines = []
    correct = total = 0
    for label, s in ds.items:
        pred = goodness.predict_multiclass(mm, s)
        lines.append("%s\t%s" % (pred, s.text()))
        total += 1
        correct += int(pred == label)
    out = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    print("accuracy %d/%d = %s" % (correct, total, repr(correct / total)))
    return 0


def _cmd_knn(args) -> int:
    ds = _load_items(args)
    measure = _resolve_measure(args, ds.alphabet)
    measure = _maybe_normalize(measure, args, ds.items)
    if args.queries:
        qds = data.load_dataset(args.queries, chars=args.chars, alphabet=ds.alphabet)
        queries = qds.items
    elif args.query is not None:
        queries = [("", _encode_with(ds.alphabet, args.query, args.chars))]
    else:
        raise CliError("knn needs --queries or --query")
    lines = []
    correct = total = 0
    for label, q in queries:
        pred = baselines.knn_classify(measure, ds.items, args.k, q)
        lines.append("%s\t%s" % (pred, q.text()))
        if label:
            total += 1
            correct += int(pred == label)
    out = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    if total:
        print("accuracy %d/%d = %s" % (correct, total, repr(correct / total)))
    return 0


def _cmd_encode_freeman(args) -> int:
    ds = data.encode_pbm_directory(args.inputs)
    data.save_dataset(ds, args.out)
    print("encoded %d bitmaps to %s" % (len(ds), args.out))
    return 0


def _cmd_check(args) -> int:
    failed = False
    if args.model:
        model = MemorylessTransducer.load_csv(args.model)
        violations = model.validate(tol=args.tol)
        if violations:
            failed = True
            for v in violations:
                print("model violation: %s" % v, file=sys.stderr)
        else:
            print("model ok")
    if args.psd:
        g = kernel.load_gram_csv(args.psd)
        report = kernel.check_psd(g)
        print("lambda_min %s trace %s" % (repr(report.lambda_min), repr(report.trace)))
        if not report.ok:
            failed = True
            print("matrix is not positive semidefinite", file=sys.stderr)
        else:
            print("psd ok")
    if not args.model and not args.psd:
        raise CliError("check needs --model and/or --psd")
    return 1 if failed else 0


_COMMANDS = {
    "train-transducer": _cmd_train_transducer,
    "prob": _cmd_prob,
    "kernel": _cmd_kernel,
    "gram": _cmd_gram,
    "gesl": _cmd_gesl,
    "goodness": _cmd_goodness,
    "fit-linear": _cmd_fit_linear,
    "predict": _cmd_predict,
    "knn": _cmd_knn,
    "encode-freeman": _cmd_encode_freeman,
    "check": _cmd_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args, _ = parser.parse_known_args(argv)
    if getattr(args, "config", None):
        # Config precedence: explicit flag > config file > built-in default.
        defaults = _parse_config(args.config)
        known = {a.dest for a in parser._actions}
        for sp in parser._subparsers._group_actions[0].choices.values():
            known |= {a.dest for a in sp._actions}
        unknown = set(defaults) - known
        if unknown:
            raise CliError("unknown config keys: %s" % ", ".join(sorted(unknown)))
        parser.set_defaults(**defaults)
        for sp in parser._subparsers._group_actions[0].choices.values():
            sp.set_defaults(**{k: v for k, v in defaults.items()
                               if k in {a.dest for a in sp._actions}})
    args = parser.parse_args(argv)
    for key in ("seed", "max_iter", "pairs_per_item", "k", "threads", "gamma_steps"):
        if hasattr(args, key) and isinstance(getattr(args, key), str):
            setattr(args, key, int(getattr(args, key)))
    for key in ("tol", "beta", "eta", "lam", "smoothing", "t"):
        if hasattr(args, key) and isinstance(getattr(args, key), str):
            setattr(args, key, float(getattr(args, key)))
    try:
        return _COMMANDS[args.command](args)
    except (CliError, ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
