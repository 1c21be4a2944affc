"""Command-line entry point.

Subcommands: gen-data (write synthetic CLDS1 datasets), run (one
experiment from a config file), sweep (grid of runs), grad-check
(gradient suites), report (aggregate result CSVs), dump-embeddings
(encode buffer and test set for external visualization).

Exit codes: 0 success, 1 usage error (bad flags, missing files, bad
config), 2 runtime failure, 3 check-suite failure.
"""

import argparse
import os
import sys

import numpy as np

from .checks import run_gradient_suites
from .config import ExperimentConfig, load_config, materialize, parse_config
from .data import Batch, gen_synthetic, write_clds1
from .errors import ConfigError, ScreplayError
from .metrics import RunResult
from .model import encode, save_model
from .report import aggregate_results, report_csv_text, write_results_csv
from .training import run_experiment

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_CHECK_FAILURE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _strs(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _default_name(echo: dict) -> str:
    return f"run_{echo['method']}_M{echo['mem_size']}_seed{echo['seed']}"


def _execute(ec: ExperimentConfig):
    setup = materialize(ec)
    return setup, run_experiment(
        setup.method,
        setup.stream,
        setup.test,
        model_config=setup.model_config,
        augmentor=setup.augmentor,
        config_echo=setup.echo,
        with_artifacts=True,
    )


def _write_outputs(result: RunResult, csv_path: str, json_path: str = None):
    write_results_csv(result, csv_path)
    if json_path is None:
        base, _ = os.path.splitext(csv_path)
        json_path = base + ".json"
    with open(json_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(result.to_json())
    return json_path


def _cmd_gen_data(args) -> int:
    train, test = gen_synthetic(
        classes=args.classes,
        dim=args.dim,
        per_class_train=args.per_class_train,
        per_class_test=args.per_class_test,
        separation=args.separation,
        seed=args.seed,
    )
    write_clds1(args.out_train, train.inputs, train.labels, train.class_count)
    write_clds1(args.out_test, test.inputs, test.labels, test.class_count)
    print(
        f"wrote {len(train)} train rows -> {args.out_train}, "
        f"{len(test)} test rows -> {args.out_test}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_run(args) -> int:
    ec = load_config(args.config, seed_override=args.seed)
    setup, (result, state, _) = _execute(ec)
    csv_path = args.out or _default_name(setup.echo) + ".csv"
    json_path = _write_outputs(result, csv_path, args.json)
    if args.save_model:
        save_model(state, args.save_model)
    print(
        f"A_N={result.average_accuracy:.4f} "
        f"wall_clock={result.wall_clock_seconds:.2f}s -> {csv_path}, {json_path}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    with open(args.config, "r", encoding="utf-8") as f:
        base = parse_config(f.read())
    methods = args.methods or [base.get("method", "er")]
    mem_sizes = args.mem_sizes or [base.get("mem_size", 100)]
    taus = args.taus or [base.get("tau", 0.1)]
    mem_batches = args.mem_batches or [base.get("mem_batch", 100)]
    seeds = args.seeds or [base.get("seed", 0)]
    os.makedirs(args.out_dir, exist_ok=True)
    for method in methods:
        for mem_size in mem_sizes:
            for tau in taus:
                for mem_batch in mem_batches:
                    for seed in seeds:
                        raw = dict(base)
                        raw.update(
                            method=method,
                            mem_size=mem_size,
                            tau=tau,
                            mem_batch=mem_batch,
                            seed=seed,
                        )
                        ec = ExperimentConfig.from_mapping(raw)
                        setup, (result, _, _) = _execute(ec)
                        name = f"run_{method}_M{mem_size}_mb{mem_batch}_tau{tau}_seed{seed}"
                        csv_path = os.path.join(args.out_dir, name + ".csv")
                        _write_outputs(result, csv_path)
                        print(
                            f"{name}: A_N={result.average_accuracy:.4f} "
                            f"({result.wall_clock_seconds:.2f}s)",
                            file=sys.stderr,
                        )
    return EXIT_OK


def _cmd_grad_check(args) -> int:
    suites = run_gradient_suites(
        seed=args.seed, loss_batches=args.batches, model_batches=args.model_batches
    )
    ok = True
    for s in suites:
        verdict = "PASS" if s.passed else "FAIL"
        print(
            f"{s.name}: max_rel_error={s.max_rel_error:.3e} "
            f"tolerance={s.tolerance:.1e} batches={s.n_batches} "
            f"({s.seconds:.2f}s) {verdict}"
        )
        ok = ok and s.passed
    return EXIT_OK if ok else EXIT_CHECK_FAILURE


def _cmd_report(args) -> int:
    text = report_csv_text(aggregate_results(args.results))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_dump_embeddings(args) -> int:
    ec = load_config(args.config, seed_override=args.seed)
    setup, (result, state, buf) = _execute(ec)
    embed_dim = setup.model_config.embed_dim
    class_count = setup.test.class_count
    buf_x, buf_y = buf.snapshot()
    if len(buf_y):
        buf_emb = encode(state, buf_x).data
    else:
        buf_emb = np.empty((0, embed_dim), dtype=np.float32)
    write_clds1(args.out_buffer, buf_emb, buf_y, class_count)
    test_emb = encode(state, Batch(setup.test.inputs, setup.test.labels)).data
    write_clds1(args.out_test, test_emb, setup.test.labels, class_count)
    print(
        f"A_N={result.average_accuracy:.4f}; wrote {len(buf_y)} buffer embeddings "
        f"-> {args.out_buffer}, {len(setup.test)} test embeddings -> {args.out_test}",
        file=sys.stderr,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="screplay", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("gen-data", parents=[], help="write synthetic CLDS1 datasets")
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--per-class-train", type=int, default=500)
    p.add_argument("--per-class-test", type=int, default=100)
    p.add_argument("--separation", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_gen_data)

    p = sub.add_parser("run", help="run one experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="results CSV path")
    p.add_argument("--json", default=None, help="results JSON path")
    p.add_argument("--save-model", default=None, help="write a CLMS1 checkpoint here")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("sweep", help="grid of runs over method/mem_size/tau/mem_batch/seed")
    p.add_argument("--config", required=True)
    p.add_argument("--methods", type=_strs, default=None)
    p.add_argument("--mem-sizes", type=_ints, default=None)
    p.add_argument("--taus", type=_floats, default=None)
    p.add_argument("--mem-batches", type=_ints, default=None)
    p.add_argument("--seeds", type=_ints, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("grad-check", help="finite-difference gradient suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batches", type=int, default=100)
    p.add_argument("--model-batches", type=int, default=5)
    p.set_defaults(fn=_cmd_grad_check)

    p = sub.add_parser("report", help="aggregate result CSVs into mean +- std")
    p.add_argument("results", nargs="+")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("dump-embeddings", help="encode buffer + test set to CLDS1")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-buffer", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(fn=_cmd_dump_embeddings)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "fn", None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except (FileNotFoundError, ConfigError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ScreplayError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
