"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import io
from .composite import fit_weights, uniform_weights
from .errors import LingDistError, UnknownLanguage
from .evaluation import harness_run
from .genetic.graph import build_closure
from .genetic.evaluate import eval_reconstruction
from .genetic.train import NEGATIVE_SIDES, TrainConfig, train_embeddings
from .registry import LanguageRegistry
from .typology.islands import MAX_ACTIVE, greedy_island_build

logger = logging.getLogger("lingdist")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
MODALITY_CHOICES = ("geo", "gen", "typ", "composite")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def default_seed() -> int:
    raw = os.environ.get("LINGDIST_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"LINGDIST_SEED must be an integer, got {raw!r}") from None


def _add_data_flags(p):
    g = p.add_argument_group("data")
    g.add_argument("--speakers", help="speaker file (geo)")
    g.add_argument("--embeddings", help="embedding file (gen)")
    g.add_argument("--features", help="feature matrix file (typ)")
    g.add_argument("--islands", help="island model file (typ)")
    g.add_argument("--weights", help="weights file (composite); uniform if omitted")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lingdist", description="Modality-matched language distances.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("train-genetic", help="embed a genealogy tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--geometry", choices=("hyperboloid", "poincare", "euclidean"), default="hyperboloid")
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--burn-in-epochs", type=int, default=20)
    p.add_argument("--burn-in-factor", type=float, default=0.1)
    p.add_argument("--negatives", type=int, default=10, help="negatives per positive pair (K)")
    p.add_argument("--epsilon", type=float, default=1e-7)
    p.add_argument("--grad-clip", type=float, default=1.0)
    p.add_argument("--spatial-clip", type=float, default=1e6)
    p.add_argument("--loss-form", choices=("softmax", "ratio"), default="softmax")
    p.add_argument("--negative-side", choices=NEGATIVE_SIDES, default="descendant")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("build-islands", help="fit latent feature islands")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-active", type=int, default=MAX_ACTIVE)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("dist", help="distance between two languages")
    p.add_argument("--modality", choices=MODALITY_CHOICES, required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    _add_data_flags(p)

    p = sub.add_parser("matrix", help="all-pairs distances for a language list")
    p.add_argument("--modality", choices=MODALITY_CHOICES, required=True)
    p.add_argument("--langs", required=True, help="comma-separated ids, or @file with one id per line")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    _add_data_flags(p)

    p = sub.add_parser("eval-recon", help="ancestor-retrieval MR/MAP of an embedding")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--tree", required=True)

    p = sub.add_parser("fit-weights", help="regression-fitted composite weights")
    p.add_argument("--rows", required=True, help="file with columns d_geo, d_gen, d_typ, loss")
    p.add_argument("--out", required=True)
    p.add_argument("--transform", choices=("logistic", "relu"), default="logistic")

    p = sub.add_parser("select", help="top-1 transfer selection and performance loss")
    p.add_argument("--scores", required=True)
    p.add_argument("--distances", help="distance matrix file (as written by `matrix`)")
    p.add_argument("--modality", choices=MODALITY_CHOICES, help="compute distances instead of reading them")
    p.add_argument("--out", help="report file; standard output if omitted")
    _add_data_flags(p)
    return parser


def _registry(args, parser, modality) -> LanguageRegistry:
    need = {
        "geo": ["speakers"],
        "gen": ["embeddings"],
        "typ": ["features", "islands"],
    }
    weights = io.load_weights(args.weights) if args.weights else uniform_weights()
    required = []
    if modality == "composite":
        for m, w in weights:
            if w > 0:
                required += need[m]
    else:
        required = need[modality]
    for flag in required:
        if getattr(args, flag) is None:
            parser.error(f"--{flag} is required for --modality {modality}")
    return LanguageRegistry(
        speakers=io.load_speakers(args.speakers) if args.speakers else {},
        embeddings=io.load_embeddings(args.embeddings) if args.embeddings else None,
        features=io.load_features(args.features) if args.features else None,
        islands=io.load_islands(args.islands) if args.islands else None,
        weights=weights,
    )


def _seed(args):
    return args.seed if args.seed is not None else default_seed()


def cmd_train_genetic(args, parser, out):
    try:
        cfg = _train_config(args)
    except ValueError as exc:
        parser.error(str(exc))
    g = io.load_tree(args.tree)
    table = train_embeddings(g, cfg)
    io.save_embeddings(args.out, table)
    final = table.losses[-1] if table.losses else float("nan")
    print(f"nodes={len(table)} d_max={io.fmt(table.d_max or float('nan'))} final_loss={final:.6f}", file=out)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        geometry=args.geometry, dim=args.dim, epochs=args.epochs, learning_rate=args.lr,
        burn_in_epochs=args.burn_in_epochs, burn_in_factor=args.burn_in_factor,
        negatives_K=args.negatives, epsilon=args.epsilon, grad_clip=args.grad_clip,
        spatial_clip=args.spatial_clip, rng_seed=_seed(args), loss_form=args.loss_form,
        negative_side=args.negative_side,
    )


def cmd_build_islands(args, parser, out):
    m = io.load_features(args.features)
    model = greedy_island_build(m, np.random.default_rng(_seed(args)), args.restarts, args.max_active)
    io.save_islands(args.out, model)
    sizes = [len(isl.feature_ids) for isl in model.islands]
    print(f"islands={len(sizes)} features={sum(sizes)} max_size={max(sizes)}", file=out)


def cmd_dist(args, parser, out):
    reg = _registry(args, parser, args.modality)
    print(f"{reg.distance(args.modality, args.a, args.b):.6f}", file=out)


def _lang_list(value):
    if value.startswith("@"):
        with open(value[1:], encoding="utf-8") as fh:
            return [line.strip() for line in fh if line.strip()]
    return [s.strip() for s in value.split(",") if s.strip()]


def cmd_matrix(args, parser, out):
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    reg = _registry(args, parser, args.modality)
    langs = _lang_list(args.langs)
    if not langs:
        parser.error("--langs is empty")
    n = len(langs)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    values = np.zeros((n, n))

    def work(ij):
        i, j = ij
        return reg.distance(args.modality, langs[i], langs[j])

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        results = list(pool.map(work, pairs))
    for (i, j), d in zip(pairs, results):
        values[i, j] = values[j, i] = d
    for lang in langs:
        reg.distance(args.modality, lang, lang)  # surfaces unknown ids on 1-element lists
    io.save_labeled_matrix(args.out, langs, langs, values)
    print(f"wrote {n}x{n} {args.modality} distances to {args.out}", file=out)


def cmd_eval_recon(args, parser, out):
    table = io.load_embeddings(args.embeddings)
    closure = build_closure(io.load_tree(args.tree))
    mr, mean_ap = eval_reconstruction(table, closure)
    print(f"MR={mr:.6f}", file=out)
    print(f"MAP={mean_ap:.6f}", file=out)


def cmd_fit_weights(args, parser, out):
    rows = io.load_weight_rows(args.rows)
    w = fit_weights(rows, args.transform)
    io.save_weights(args.out, w)
    print(" ".join(f"{k}={v:.6f}" for k, v in w), file=out)


def cmd_select(args, parser, out):
    scores = io.load_scores(args.scores)
    if (args.distances is None) == (args.modality is None):
        parser.error("exactly one of --distances or --modality is required")
    if args.distances:
        rows, cols, values = io.load_labeled_matrix(args.distances)
        ri = {r: i for i, r in enumerate(rows)}
        ci = {c: j for j, c in enumerate(cols)}

        def dist(a, b):
            if a not in ri:
                raise UnknownLanguage(a)
            if b not in ci:
                raise UnknownLanguage(b)
            d = values[ri[a], ci[b]]
            if math.isnan(d):
                raise LingDistError(f"no distance between {a!r} and {b!r}")
            return float(d)
    else:
        reg = _registry(args, parser, args.modality)

        def dist(a, b):
            return reg.distance(args.modality, a, b)

    report = harness_run(scores, dist)
    text = report.to_text()
    if args.out:
        io.atomic_write(args.out, text)
        print(f"mean_loss_pct={report.mean_loss_pct:.6f}", file=out)
    else:
        out.write(text)


COMMANDS = {
    "train-genetic": cmd_train_genetic,
    "build-islands": cmd_build_islands,
    "dist": cmd_dist,
    "matrix": cmd_matrix,
    "eval-recon": cmd_eval_recon,
    "fit-weights": cmd_fit_weights,
    "select": cmd_select,
}


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    sub = parser._subparsers._group_actions[0].choices[args.command]
    try:
        COMMANDS[args.command](args, sub, out)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"lingdist: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LingDistError, OSError) as exc:
        print(f"lingdist: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
