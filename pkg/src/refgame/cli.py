"""Command-line entry point: gen-world, train, eval, analyze, serve, replay.

Every run lives in a run directory holding the manifest echo, the world, the
checkpoint, the metrics log, and analysis outputs. Exit codes: 0 ok, 2 config
error, 4 I/O error, 3 anything else; failures print one machine-parsable
line `error: <kind>: <message>` to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis, persistence
from .errors import ConfigError, RefgameError
from .game import evaluate
from .nn import GibbsConfig
from .persistence import Checkpoint, ExperimentManifest, manifest_from_dict
from .training import TrainConfig, train
from .world import CLASS_LEVEL, INSTANCE_LEVEL, WorldConfig, generate_world, make_test_set

DEFAULT_PERMUTATIONS = 10_000
DEFAULT_EVAL_GAMES = 1000


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="refgame", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--manifest", help="experiment manifest JSON")
        p.add_argument("--out", help="run directory (default: manifest out_dir)")
        p.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
            help="dotted manifest override, e.g. train.lr=20 or world.seed=3",
        )
        p.add_argument("--seed", type=int, help="override both world and train seeds")

    p = sub.add_parser("gen-world", help="generate and store the synthetic world")
    common(p)

    p = sub.add_parser("train", help="train a sender/receiver pair")
    common(p)
    p.add_argument("--iterations", type=int, help="override train.n_iterations")
    p.add_argument("--arch", choices=["agnostic", "informed"], help="override train.arch")
    p.add_argument("--vocab", type=int, help="override train.vocab_size")
    p.add_argument("--mode", choices=["instance", "class"], help="override train.mode")
    p.add_argument("--grounding", action="store_true", help="enable grounding mode")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a fresh test set")
    common(p)
    p.add_argument("--games", type=int, default=DEFAULT_EVAL_GAMES)

    p = sub.add_parser("analyze", help="purity, permutation chance, spectrum, grounding rate")
    common(p)
    p.add_argument("--permutations", type=int, default=DEFAULT_PERMUTATIONS)
    p.add_argument("--no-center", action="store_true", help="skip column centering for the spectrum")

    p = sub.add_parser("serve", help="serve the human-plays-receiver API")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--static", help="directory of web client files to serve at /")
    p.add_argument(
        "--expose-target", action="store_true",
        help="enable the test-only debug endpoint that reveals the pending target",
    )

    p = sub.add_parser("replay", help="render the metrics log as an ASCII curve")
    common(p)
    p.add_argument("--width", type=int, default=40)

    return parser


# ---------------------------------------------------------------------------
# manifest plumbing


def _parse_override(expr: str) -> tuple[list[str], object]:
    if "=" not in expr:
        raise ConfigError(f"override {expr!r} is not KEY=VALUE")
    key, raw = expr.split("=", 1)
    path = key.strip().split(".")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def load_effective_manifest(args) -> ExperimentManifest:
    if args.manifest:
        try:
            with open(args.manifest) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise
        except json.JSONDecodeError as exc:
            raise ConfigError(f"manifest {args.manifest} is not valid JSON: {exc}") from exc
    else:
        doc = {"world": {}, "train": {}}

    for expr in args.overrides:
        path, value = _parse_override(expr)
        node = doc
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value

    if args.seed is not None:
        doc.setdefault("world", {})["seed"] = args.seed
        doc.setdefault("train", {})["seed"] = args.seed
    if getattr(args, "iterations", None) is not None:
        doc.setdefault("train", {})["n_iterations"] = args.iterations
    if getattr(args, "arch", None):
        doc.setdefault("train", {})["arch"] = args.arch
    if getattr(args, "vocab", None) is not None:
        doc.setdefault("train", {})["vocab_size"] = args.vocab
    if getattr(args, "mode", None):
        doc.setdefault("train", {})["mode"] = (
            INSTANCE_LEVEL if args.mode == "instance" else CLASS_LEVEL
        )
    if getattr(args, "grounding", False):
        doc.setdefault("train", {})["grounding"] = True

    manifest = manifest_from_dict(doc)
    if args.out:
        manifest.out_dir = args.out
    return manifest


def _run_dir(manifest: ExperimentManifest) -> str:
    os.makedirs(manifest.out_dir, exist_ok=True)
    return manifest.out_dir


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_world(args) -> int:
    manifest = load_effective_manifest(args)
    run_dir = _run_dir(manifest)
    world = generate_world(manifest.world)
    persistence.save_manifest(os.path.join(run_dir, "manifest.json"), manifest)
    persistence.save_world(os.path.join(run_dir, "world.json"), world)
    print(f"world: {world.n_concepts} concepts, {len(world.instances)} instances -> {run_dir}/world.json")
    return 0


def cmd_train(args) -> int:
    manifest = load_effective_manifest(args)
    run_dir = _run_dir(manifest)
    world = generate_world(manifest.world)
    persistence.save_manifest(os.path.join(run_dir, "manifest.json"), manifest)
    persistence.save_world(os.path.join(run_dir, "world.json"), world)

    result = train(manifest.train, world)
    persistence.save_metrics_jsonl(os.path.join(run_dir, "metrics.jsonl"), result.metrics)
    ckpt = Checkpoint(
        train_config=manifest.train,
        iteration=result.games_played,
        sender=result.sender,
        receiver=result.receiver,
        baseline=result.baseline,
        rng_descriptor={"seed": manifest.train.seed, "games_played": result.games_played},
        label_set=result.label_set,
    )
    persistence.save_checkpoint(os.path.join(run_dir, "checkpoint.json"), ckpt)
    last = result.metrics[-1] if result.metrics else {}
    print(
        f"trained {result.games_played} games -> {run_dir}/checkpoint.json "
        f"(final eval {last.get('eval_success', float('nan')):.1f}%, "
        f"used symbols {last.get('used_symbols', 0)})"
    )
    return 0


def cmd_eval(args) -> int:
    manifest = load_effective_manifest(args)
    run_dir = _run_dir(manifest)
    world = persistence.load_world(os.path.join(run_dir, "world.json"))
    ckpt = persistence.load_checkpoint(os.path.join(run_dir, "checkpoint.json"))
    cfg = ckpt.train_config
    seed = args.seed if args.seed is not None else cfg.seed
    test_rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    play_rng = np.random.default_rng(np.random.SeedSequence([seed, 102]))
    test_set = make_test_set(world, cfg.mode, args.games, test_rng)
    report = evaluate(ckpt.sender, ckpt.receiver, test_set, cfg.gibbs(), play_rng)
    persistence.save_eval_report(os.path.join(run_dir, "eval_report.json"), report)
    print(
        f"eval: comm_success {report.comm_success:.2f}% over {report.n_games} games, "
        f"used_symbols {report.used_symbols} -> {run_dir}/eval_report.json"
    )
    return 0


def cmd_analyze(args) -> int:
    manifest = load_effective_manifest(args)
    run_dir = _run_dir(manifest)
    world = persistence.load_world(os.path.join(run_dir, "world.json"))
    report = persistence.load_eval_report(os.path.join(run_dir, "eval_report.json"))
    out_dir = os.path.join(run_dir, "analysis")
    os.makedirs(out_dir, exist_ok=True)

    assign = analysis.majority_symbol_map(report, concepts=list(range(world.n_concepts)))
    categories = world.categories_table()
    rng = np.random.default_rng(np.random.SeedSequence([manifest.train.seed, 103]))
    result = analysis.permutation_chance(assign, categories, args.permutations, rng)
    persistence.atomic_write_json(os.path.join(out_dir, "purity.json"), result.to_dict())

    spectrum = analysis.usage_spectrum(report.usage, center=not args.no_center)
    persistence.export_spectrum_csv(os.path.join(out_dir, "spectrum.csv"), spectrum)
    persistence.export_usage_csv(os.path.join(out_dir, "usage.csv"), report)

    ckpt = persistence.load_checkpoint(os.path.join(run_dir, "checkpoint.json"))
    analysis.export_embeddings(world, ckpt.sender, assign, os.path.join(out_dir, "embeddings.csv"))

    grounding_doc = None
    if ckpt.label_set:
        test_rng = np.random.default_rng(np.random.SeedSequence([manifest.train.seed, 104]))
        play_rng = np.random.default_rng(np.random.SeedSequence([manifest.train.seed, 105]))
        test_set = make_test_set(world, ckpt.train_config.mode, DEFAULT_EVAL_GAMES, test_rng)
        _, records = evaluate(
            ckpt.sender, ckpt.receiver, test_set, ckpt.train_config.gibbs(), play_rng,
            keep_records=True,
        )
        rate, chance = analysis.grounding_match_rate(
            records, ckpt.label_set, ckpt.train_config.vocab_size
        )
        grounding_doc = {"match_rate": rate, "chance": chance}
        persistence.atomic_write_json(os.path.join(out_dir, "grounding.json"), grounding_doc)

    print(
        f"analysis: purity {result.purity:.2f}% (chance {result.chance_mean:.2f}%, "
        f"obs-chance {result.obs_minus_chance:.2f}%, p={result.p_value:.2e}), "
        f"spectrum[{len(spectrum)}] -> {out_dir}/"
        + (f", grounding match {grounding_doc['match_rate']:.1f}%" if grounding_doc else "")
    )
    return 0


def cmd_serve(args) -> int:
    from .server import PlayServer

    manifest = load_effective_manifest(args)
    run_dir = _run_dir(manifest)
    server = PlayServer(
        run_dir=run_dir,
        host=args.host,
        port=args.port,
        static_dir=args.static,
        expose_target=args.expose_target,
    )
    print(f"serving {run_dir} on http://{args.host}:{server.port}/v1 (ctrl-c stops)", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


def render_curve(metrics: list[dict], width: int = 40) -> str:
    """ASCII success-vs-iteration curve; one line per metrics record."""
    if not metrics:
        return "(empty metrics log)"
    lines = []
    for rec in metrics:
        success = rec["eval_success"]
        filled = int(round(success / 100.0 * width))
        bar = "#" * filled + "." * (width - filled)
        lines.append(f"{rec['iteration']:>8} |{bar}| {success:.1f}")
    return "\n".join(lines)


def cmd_replay(args) -> int:
    manifest = load_effective_manifest(args)
    metrics = persistence.load_metrics_jsonl(os.path.join(manifest.out_dir, "metrics.jsonl"))
    print(render_curve(metrics, width=args.width))
    return 0


COMMANDS = {
    "gen-world": cmd_gen_world,
    "train": cmd_train,
    "eval": cmd_eval,
    "analyze": cmd_analyze,
    "serve": cmd_serve,
    "replay": cmd_replay,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 4
    except RefgameError as exc:
        print(f"error: runtime: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
