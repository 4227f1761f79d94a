"""Command-line interface.

Subcommands: train, evaluate, eig, kernel, filters, synth, check-grad.
Exit codes: 0 success, 1 usage error, 2 data validation error, 3 numerical
divergence. Exporting commands render a companion PNG figure next to their
delimited output unless --no-plot is given.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .anisotropic import build_operators
from .dataset import load_graph_file, save_dataset, synth_directional_task
from .diffusion import Scheme, diffuse_implicit, diffuse_spectral
from .errors import AnisodiffError, DivergenceDetectedError
from .graph import structural_matrices
from .spectral import decompose, fiedler_vector
from .training import ExperimentConfig, evaluate, run_experiment

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse parser that reports usage problems via UsageError.

    The default argparse behavior exits with status 2, which this CLI
    reserves for data validation failures.
    """

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> Parser:
    parser = Parser(prog="anisodiff",
                    description="Learnable graph diffusion with anisotropic "
                                "aggregation filters")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out-dir", required=True,
                   help="directory for metrics, checkpoints and the figure")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("evaluate", help="MAE of a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser("eig", help="generalized Laplacian eigenpairs of one graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--k", required=True, type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("kernel", help="diffusion kernel from a one-hot source")
    p.add_argument("--graph", required=True)
    p.add_argument("--scheme", required=True, choices=["implicit", "spectral"])
    p.add_argument("--t", required=True, type=float)
    p.add_argument("--k", type=int, default=None,
                   help="bandwidth for the spectral scheme (default: n)")
    p.add_argument("--source", required=True, type=int)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--anisotropic", action="store_true",
                   help="also emit the kernels composed with b_av and b_dx")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("filters", help="b_av and b_dx rows for one node")
    p.add_argument("--graph", required=True)
    p.add_argument("--node", required=True, type=int)
    p.add_argument("--out", required=True, help="JSON output path")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("synth", help="generate the synthetic directional dataset")
    p.add_argument("--num-graphs", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--ndjson", action="store_true")

    p = sub.add_parser("check-grad",
                       help="finite-difference audit of all analytic gradients")
    p.add_argument("--seed", type=int, default=0)

    return parser


def _figure_path(out_path) -> Path:
    return Path(out_path).with_suffix(".png")


def cmd_train(args) -> int:
    config = ExperimentConfig.from_json(args.config, seed=args.seed)
    notes = config.validate()
    effective = {k: (list(v) if isinstance(v, tuple) else v)
                 for k, v in vars(config).items()}
    print("effective config:")
    print(json.dumps(effective, indent=1))
    for note in notes:
        print(f"note: {note}")
    result = run_experiment(config, args.out_dir, plot=not args.no_plot)
    final = result.metrics.entries[-1]
    print(f"final train loss {final['train_loss']:.6f}  "
          f"val MAE {final['val_mae']:.6f}  test MAE {final['test_mae']:.6f}")
    print(f"artifacts written to {args.out_dir}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    mae = evaluate(args.checkpoint, args.data)
    print(f"{mae:.12g}")
    return EXIT_OK


def cmd_eig(args) -> int:
    graph, _ = load_graph_file(args.graph)
    sd = decompose(graph, args.k)
    payload = {
        "k": sd.k,
        "eigenvalues": sd.eigenvalues.tolist(),
        "eigenvectors": sd.eigenvectors.tolist(),
    }
    if sd.k >= 2:
        payload["fiedler"] = sd.fiedler.tolist()
    Path(args.out).write_text(json.dumps(payload, indent=1) + "\n")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_kernel(args) -> int:
    graph, _ = load_graph_file(args.graph)
    n = graph.node_count
    if not 0 <= args.source < n:
        raise UsageError(f"--source must be in [0, {n})")
    if args.t < 0:
        raise UsageError("--t must be nonnegative")
    sm = structural_matrices(graph)
    one_hot = np.zeros(n)
    one_hot[args.source] = 1.0

    if args.scheme == Scheme.IMPLICIT.value:
        diffused = diffuse_implicit(sm, one_hot, np.array([args.t])).values[:, 0]
    else:
        k = args.k if args.k is not None else n
        sd = decompose(graph, k)
        diffused = diffuse_spectral(sd, sm, one_hot, np.array([args.t])).values[:, 0]

    columns = {"diffusion": diffused}
    if args.anisotropic:
        ops = build_operators(graph, fiedler_vector(graph))
        columns["b_av"] = ops.b_av @ diffused
        columns["b_dx"] = ops.b_dx @ diffused

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", *columns.keys()])
        for i in range(n):
            writer.writerow([i, *(repr(float(columns[c][i])) for c in columns)])

    if not args.no_plot:
        from .plots import save_kernel_figure
        save_kernel_figure(
            _figure_path(args.out), columns,
            f"{args.scheme} kernel, t={args.t}, source node {args.source}",
        )
        print(f"wrote {args.out} and {_figure_path(args.out)}")
    else:
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_filters(args) -> int:
    graph, _ = load_graph_file(args.graph)
    if not 0 <= args.node < graph.node_count:
        raise UsageError(f"--node must be in [0, {graph.node_count})")
    ops = build_operators(graph, fiedler_vector(graph))
    payload = {
        "node": args.node,
        "b_av_row": ops.b_av[args.node].tolist(),
        "b_dx_row": ops.b_dx[args.node].tolist(),
    }
    Path(args.out).write_text(json.dumps(payload, indent=1) + "\n")
    if not args.no_plot:
        from .plots import save_filters_figure
        save_filters_figure(_figure_path(args.out), args.node,
                            ops.b_av[args.node], ops.b_dx[args.node])
        print(f"wrote {args.out} and {_figure_path(args.out)}")
    else:
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    records = synth_directional_task(args.num_graphs, args.seed)
    save_dataset(records, args.out, ndjson=args.ndjson)
    targets = np.array([r.target[0] for r in records])
    print(f"wrote {len(records)} graphs to {args.out} "
          f"(target mean {targets.mean():.4f}, std {targets.std():.4f})")
    return EXIT_OK


def cmd_check_grad(args) -> int:
    from .gradcheck import run_all
    results = run_all(seed=args.seed)
    for name, err in results.items():
        print(f"{name:28s} max relative error {err:.3e}")
    worst = max(results.values())
    print(f"{'worst':28s} max relative error {worst:.3e}")
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "eig": cmd_eig,
    "kernel": cmd_kernel,
    "filters": cmd_filters,
    "synth": cmd_synth,
    "check-grad": cmd_check_grad,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceDetectedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (AnisodiffError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
