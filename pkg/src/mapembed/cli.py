"""Command-line front end: ``mapembed {ingest,train,build,eval,grid,synth}``.

Every command writes its outputs plus a ``manifest.json`` (resolved config,
input and output hashes) into ``--out``. Settings resolve as
CLI flags > ``--config`` file > ``--preset`` > built-in defaults.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical divergence.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .errors import DataError, DivergenceError
from .evaluation import evaluate, load_benchmark, results_to_json, results_to_tsv
from .grid import grid_search, grid_to_json, grid_to_tsv
from .mapper import PRESETS, TrainConfig, load_model, save_model, train
from .multimodal import build_mapc_table, build_map_table, write_sidecar
from .synth import SyntheticSpec, generate, write_synthetic
from .vectors import load_text_embeddings, write_text_embeddings
from .visual import PAPER_POLICY, AggregationPolicy, aggregate_mean, iter_feature_records

logger = logging.getLogger("mapembed")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3

# name -> (type, default)
SETTINGS = {
    "seed": (int, 0),
    "kind": (str, "linear"),
    "learning_rate": (float, 0.1),
    "dropout_rate": (float, 0.1),
    "epochs": (int, 100),
    "batch_size": (int, 64),
    "hidden_units": (int, 300),
    "shuffle": (bool, True),
    "dropout_input": (bool, False),
    "normalize_inputs": (bool, False),
    "min_images": (int, 50),
    "max_images": (int, 500),
    "normalize_text": (bool, False),
    "format": (str, "auto"),
    "n_words": (int, 1000),
    "d_l": (int, 20),
    "d_v": (int, 10),
    "noise_sigma": (float, 0.1),
    "benchmark_size": (int, 500),
    "alpha": (float, 0.5),
    "visual_fraction": (float, 0.5),
    "images_per_concept": (int, 10),
    "visual_scale": (float, 1.0),
}

_paper_policy = {"min_images": PAPER_POLICY.min_images, "max_images": PAPER_POLICY.max_images}
CLI_PRESETS = {name: {**values, **_paper_policy} for name, values in PRESETS.items()}

TRAIN_KEYS = ("seed", "kind", "learning_rate", "dropout_rate", "epochs", "batch_size",
              "hidden_units", "shuffle", "dropout_input", "normalize_inputs")
SYNTH_KEYS = ("seed", "n_words", "d_l", "d_v", "noise_sigma", "benchmark_size", "alpha",
              "visual_fraction", "images_per_concept", "visual_scale")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in SETTINGS:
            raise UsageError(f"{path}:{lineno}: unknown setting {key!r}")
        typ = SETTINGS[key][0]
        try:
            values[key] = _parse_bool(value) if typ is bool else typ(value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from None
    return values


def resolve_settings(args: argparse.Namespace, keys) -> dict:
    settings = {key: SETTINGS[key][1] for key in keys}
    if args.preset:
        settings.update({k: v for k, v in CLI_PRESETS[args.preset].items() if k in settings})
    if args.config:
        if not Path(args.config).is_file():
            raise UsageError(f"config file not found: {args.config}")
        settings.update({k: v for k, v in read_config_file(args.config).items() if k in settings})
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require_inputs(**paths) -> None:
    for label, p in paths.items():
        for item in p if isinstance(p, list) else [p]:
            if not Path(item).is_file():
                raise UsageError(f"--{label.replace('_', '-')}: file not found: {item}")


def write_manifest(out: Path, command: str, settings: dict, inputs: dict, outputs) -> None:
    """Record what produced ``outputs``. Paths are stored by name so reruns into
    another directory yield an identical manifest."""
    def describe(p):
        return {"file": Path(p).name, "sha256": sha256_file(p)}

    doc = {
        "tool": "mapembed",
        "version": __version__,
        "command": command,
        "config": settings,
        "inputs": {k: [describe(p) for p in v] if isinstance(v, list) else describe(v)
                   for k, v in inputs.items()},
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
    }
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")


def _train_config(s: dict) -> TrainConfig:
    try:
        return TrainConfig(
            learning_rate=s["learning_rate"], dropout_rate=s["dropout_rate"], epochs=s["epochs"],
            batch_size=s["batch_size"], seed=s["seed"], shuffle=s["shuffle"],
            hidden_units=s["hidden_units"], dropout_input=s["dropout_input"],
            normalize_inputs=s["normalize_inputs"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _kind(s: dict) -> str:
    if s["kind"] not in ("linear", "mlp"):
        raise UsageError(f"unknown model kind {s['kind']!r}")
    return s["kind"]


def cmd_ingest(args) -> int:
    _require_inputs(features=args.features)
    s = resolve_settings(args, ("min_images", "max_images"))
    try:
        policy = AggregationPolicy(s["min_images"], s["max_images"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    table, report = aggregate_mean(iter_feature_records(args.features), policy)
    out = args.out
    write_text_embeddings(table, out / "visual.txt")
    (out / "aggregation_report.json").write_text(report.to_json(), encoding="utf-8")
    write_manifest(out, "ingest", s, {"features": args.features},
                   [out / "visual.txt", out / "aggregation_report.json"])
    logger.info("kept %d concepts (dropped %d, capped %d)", report.concepts_kept,
                len(report.concepts_dropped), len(report.concepts_capped))
    return EXIT_OK


def cmd_train(args) -> int:
    _require_inputs(text=args.text, visual=args.visual)
    s = resolve_settings(args, TRAIN_KEYS)
    kind, config = _kind(s), _train_config(s)
    text = load_text_embeddings(args.text, name="text")
    visual = load_text_embeddings(args.visual, name="visual")
    model, report = train(text, visual, kind, config)
    out = args.out
    save_model(model, out / "model.json")
    (out / "train_report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n",
                                           encoding="utf-8")
    write_manifest(out, "train", {**s, "kind": kind}, {"text": args.text, "visual": args.visual},
                   [out / "model.json", out / "train_report.json"])
    logger.info("trained %s map on %d pairs, final loss %.6g", kind, report.examples_seen,
                report.final_loss)
    return EXIT_OK


def cmd_build(args) -> int:
    _require_inputs(model=args.model, text=args.text)
    s = resolve_settings(args, ("normalize_text",))
    model = load_model(args.model)
    text = load_text_embeddings(args.text, name="text")
    map_table = build_map_table(model, text)
    mapc_table, degenerate = build_mapc_table(model, text, s["normalize_text"])
    out = args.out
    outputs = []
    for table in (map_table, mapc_table):
        write_text_embeddings(table, out / f"{table.name}.txt")
        write_sidecar(table, out / f"{table.name}.json", model)
        outputs += [out / f"{table.name}.txt", out / f"{table.name}.json"]
    (out / "build_report.json").write_text(
        json.dumps({"degenerate_words": list(degenerate), "n_degenerate": len(degenerate)},
                   indent=2) + "\n", encoding="utf-8")
    outputs.append(out / "build_report.json")
    write_manifest(out, "build", s, {"model": args.model, "text": args.text}, outputs)
    return EXIT_OK


def read_vocab(path) -> frozenset[str]:
    """First token of each non-blank line, lowercased; an embedding file works too."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if parts:
            words.add(parts[0].lower())
    return frozenset(words)


def _table_name(path: Path) -> str:
    sidecar = path.with_suffix(".json")
    if sidecar.is_file():
        try:
            return json.loads(sidecar.read_text(encoding="utf-8"))["name"]
        except (ValueError, KeyError):
            pass
    return path.stem


def cmd_eval(args) -> int:
    _require_inputs(tables=args.tables, benchmarks=args.benchmarks, visual_vocab=args.visual_vocab)
    s = resolve_settings(args, ("format",))
    if s["format"] not in ("auto", "tsv", "space"):
        raise UsageError(f"unknown benchmark format {s['format']!r}")
    vocab = read_vocab(args.visual_vocab)
    benchmarks = [load_benchmark(p, s["format"]) for p in args.benchmarks]
    results = []
    for path in args.tables:
        table = load_text_embeddings(path, name=_table_name(Path(path)))
        results += [evaluate(table, b, vocab) for b in benchmarks]
    out = args.out
    (out / "report.tsv").write_text(results_to_tsv(results), encoding="utf-8")
    (out / "report.json").write_text(results_to_json(results), encoding="utf-8")
    write_manifest(out, "eval", s, {"tables": args.tables, "benchmarks": args.benchmarks,
                                    "visual_vocab": args.visual_vocab},
                   [out / "report.tsv", out / "report.json"])
    if not args.quiet:
        sys.stdout.write(results_to_tsv(results))
    return EXIT_OK


def cmd_grid(args) -> int:
    _require_inputs(text=args.text, visual=args.visual, benchmarks=args.benchmarks)
    s = resolve_settings(args, TRAIN_KEYS + ("normalize_text", "format"))
    kind, base = _kind(s), _train_config(s)
    text = load_text_embeddings(args.text, name="text")
    visual = load_text_embeddings(args.visual, name="visual")
    benchmarks = [load_benchmark(p, s["format"]) for p in args.benchmarks]
    cells = grid_search(text, visual, kind, benchmarks, base, master_seed=s["seed"],
                        normalize_text=s["normalize_text"])
    out = args.out
    (out / "grid.tsv").write_text(grid_to_tsv(cells), encoding="utf-8")
    (out / "grid.json").write_text(grid_to_json(cells), encoding="utf-8")
    write_manifest(out, "grid", s, {"text": args.text, "visual": args.visual,
                                    "benchmarks": args.benchmarks},
                   [out / "grid.tsv", out / "grid.json"])
    diverged = sum(c.status != "ok" for c in cells)
    logger.info("grid finished: %d cells, %d diverged", len(cells), diverged)
    return EXIT_OK


def cmd_synth(args) -> int:
    s = resolve_settings(args, SYNTH_KEYS)
    try:
        spec = SyntheticSpec(**s)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    paths = write_synthetic(generate(spec), args.out)
    write_manifest(args.out, "synth", asdict(spec), {}, list(paths.values()))
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="file of 'key = value' lines")
    p.add_argument("--preset", choices=sorted(CLI_PRESETS), default=None)
    p.add_argument("--quiet", action="store_true")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=("linear", "mlp"), default=None)
    p.add_argument("--learning-rate", "--lr", dest="learning_rate", type=float, default=None)
    p.add_argument("--dropout-rate", "--dropout", dest="dropout_rate", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--hidden-units", type=int, default=None)
    p.add_argument("--shuffle", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--dropout-input", action=argparse.BooleanOptionalAction, default=None,
                   help="mlp only: also drop input units")
    p.add_argument("--normalize-inputs", action=argparse.BooleanOptionalAction, default=None,
                   help="unit-normalize text vectors before mapping")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mapembed", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="aggregate per-image features into concept vectors")
    p.add_argument("--features", required=True)
    p.add_argument("--min-images", type=int, default=None)
    p.add_argument("--max-images", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="fit the language-to-vision map")
    p.add_argument("--text", required=True, help="text embedding file")
    p.add_argument("--visual", required=True, help="visual table from 'ingest'")
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("build", help="write MAP and MAP-C tables")
    p.add_argument("--model", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--normalize-text", action=argparse.BooleanOptionalAction, default=None,
                   help="also unit-normalize the text half of MAP-C")
    _add_common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval", help="score tables on similarity benchmarks")
    p.add_argument("--tables", nargs="+", required=True)
    p.add_argument("--benchmarks", nargs="+", required=True)
    p.add_argument("--visual-vocab", required=True,
                   help="words with a visual training vector (one per line, or a visual table)")
    p.add_argument("--format", choices=("auto", "tsv", "space"), default=None)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="learning-rate x dropout sweep plus presets")
    p.add_argument("--text", required=True)
    p.add_argument("--visual", required=True)
    p.add_argument("--benchmarks", nargs="+", required=True)
    p.add_argument("--format", choices=("auto", "tsv", "space"), default=None)
    p.add_argument("--normalize-text", action=argparse.BooleanOptionalAction, default=None)
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth dataset")
    for key in SYNTH_KEYS[1:]:
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=SETTINGS[key][0], default=None)
    _add_common(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except UsageError as exc:
        print(f"mapembed {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"mapembed {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"mapembed {args.command}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"mapembed {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
