"""Command-line front end: ``umaplite --input data.csv --output emb.csv``."""

import argparse
import math
import sys

from . import densmap, parametric
from .config import MODES, RunConfig
from .dataio import emit_scatter_svg, format_row, load_csv, load_labels, write_embedding
from .errors import StageError, UmapError
from .pipeline import run, stage

_DEFAULTS = RunConfig()


def _bool(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser():
    ap = argparse.ArgumentParser(prog="umaplite", description="Neighbor embedding of a numeric CSV file.")
    io = ap.add_argument_group("input/output")
    io.add_argument("--input", required=True, help="CSV file, one point per row")
    io.add_argument("--has-header", action="store_true", help="skip the first line of --input")
    io.add_argument("--output", help="embedding CSV to write")
    io.add_argument("--plot", help="SVG scatter plot to write (2-D embeddings only)")
    io.add_argument("--labels", help="integer class labels, one per line, for the agreement metric")
    io.add_argument("--verbose", action="store_true", help="stream per-epoch reports to stdout")

    g = ap.add_argument_group("embedding")
    g.add_argument("--k", type=int, default=_DEFAULTS.k)
    g.add_argument("--a", type=float, default=_DEFAULTS.a)
    g.add_argument("--b", type=float, default=_DEFAULTS.b)
    g.add_argument("--neg", type=int, default=_DEFAULTS.m, help="negative samples per firing edge")
    g.add_argument("--epochs", type=int, default=_DEFAULTS.epochs)
    g.add_argument("--eps", type=float, default=_DEFAULTS.eps)
    g.add_argument("--dim", type=int, default=_DEFAULTS.dim)
    g.add_argument("--seed", type=int, default=_DEFAULTS.seed)
    g.add_argument("--densmap-lambda", type=float, nargs="?", const=densmap.DEFAULT_LAMBDA,
                   default=_DEFAULTS.densmap_lambda,
                   help=f"density regularizer weight ({densmap.DEFAULT_LAMBDA} if given without a value)")
    g.add_argument("--update-negatives", type=_bool, nargs="?", const=True,
                   default=_DEFAULTS.update_negatives)
    g.add_argument("--effective-weights", type=_bool, nargs="?", const=True,
                   default=_DEFAULTS.effective_weights)
    g.add_argument("--grad-clip", type=float, default=_DEFAULTS.grad_clip,
                   help="l2 cap per gradient vector; 0 disables clipping")
    g.add_argument("--mode", choices=MODES, default=_DEFAULTS.mode)

    s = ap.add_argument_group("progressive mode")
    s.add_argument("--batch-size", type=int, default=_DEFAULTS.batch_size)
    s.add_argument("--stream-update-positives", type=_bool, nargs="?", const=True,
                   default=_DEFAULTS.stream_update_positives)

    p = ap.add_argument_group("parametric mode")
    p.add_argument("--hidden", type=int, default=_DEFAULTS.hidden)
    p.add_argument("--batch", type=int, default=_DEFAULTS.param_batch, help="mini-batch size")
    p.add_argument("--lr", type=float, default=_DEFAULTS.lr)
    p.add_argument("--save-net", help="write the trained encoder to this file")
    p.add_argument("--load-net", help="embed with a saved encoder instead of training")
    return ap


def config_from_args(args):
    return RunConfig(
        k=args.k, a=args.a, b=args.b, m=args.neg, eps=args.eps, epochs=args.epochs,
        dim=args.dim, seed=args.seed, densmap_lambda=args.densmap_lambda,
        update_negatives=args.update_negatives, effective_weights=args.effective_weights,
        grad_clip=None if args.grad_clip == 0 else args.grad_clip, mode=args.mode,
        batch_size=args.batch_size, stream_update_positives=args.stream_update_positives,
        hidden=args.hidden, param_batch=args.batch, lr=args.lr,
    )


def _num(x):
    return "n/a" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.6g}"


def summary_lines(result, n, d):
    q = result.quality
    cfg = result.config_echo
    return [
        "# summary",
        f"# mode: {cfg.mode}",
        f"# points: {n}  input dim: {d}  embedding dim: {result.embedding.p}",
        f"# epochs: {len(result.reports)}",
        f"# knn_preservation(k={min(cfg.k, n - 1)}): {_num(q.knn_preservation)}",
        f"# label_agreement: {_num(q.label_agreement)}",
        f"# loss_initial: {_num(q.loss_initial)}",
        f"# loss_final: {_num(q.loss_final)}",
    ]


def main(argv=None):
    args = build_parser().parse_args(argv)
    out = sys.stdout

    def on_report(rep):
        out.write(rep.csv_line() + "\n")

    def on_batch(index, emb):
        out.write(f"# batch {index} points {emb.n}\n")
        for row in emb.coords:
            out.write(format_row(row) + "\n")

    try:
        with stage("config"):
            config = config_from_args(args).validate()
        with stage("dataio"):
            data = load_csv(args.input, has_header=args.has_header)
            labels = load_labels(args.labels) if args.labels else None
            net = parametric.load_encoder(args.load_net) if args.load_net else None
        result = run(
            config, data, labels,
            on_report=on_report if args.verbose else None,
            on_batch=on_batch if args.verbose else None,
            net=net,
        )
        with stage("dataio"):
            if args.output:
                write_embedding(result.embedding, args.output)
            if args.plot:
                emit_scatter_svg(result.embedding, args.plot, labels=labels)
            if args.save_net:
                if result.net is None:
                    raise ValueError("--save-net needs --mode parametric")
                parametric.save_encoder(result.net, args.save_net)
    except StageError as exc:
        print(f"umaplite: {exc}", file=sys.stderr)
        return 1
    except (UmapError, OSError) as exc:
        print(f"umaplite: [dataio] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    for line in summary_lines(result, data.n, data.d):
        out.write(line + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
