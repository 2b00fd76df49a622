"""Command-line entry point tying search, discretization, training, evaluation
and data generation together.

Every command writes a ``manifest.json`` into its output directory.  The
manifest embeds the effective configuration (and input content hashes), so a
run can be replayed bit-identically with ``cyclenas replay``.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

from . import evaluation as ev
from . import networks as nw
from .data import SyntheticTask, UnpairedDataset, generate_synthetic, load_dataset_root, write_dataset
from .losses import LossWeights
from .search import SCHEMES, SearchConfig, run_search, write_metrics_csv
from .space import (
    GENERATOR,
    AlphaTable,
    SpecError,
    decode_spec,
    discretize,
    encode_spec,
    scientific,
    search_space_size,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

SPEC_FILES = {"g_a": "spec_GA.json", "g_b": "spec_GB.json",
              "d_a": "spec_DA.json", "d_b": "spec_DB.json"}

OUT_ROOT_ENV = "CYCLENAS_OUT"


# ---------------------------------------------------------------------------
# helpers


def _iso_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _hash_folder(root: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(p for p in Path(root).rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(root)).encode())
        digest.update(bytes.fromhex(_sha256_file(path)))
    return digest.hexdigest()


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(out: Path, command: str, job: dict, outputs: list[str]) -> None:
    _write_json(out / "manifest.json", {
        "command": command,
        "job": job,
        "outputs": sorted(outputs),
        "created": _iso_now(),
    })


def _resolve_out(args, command: str, seed: int | None = None) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        root = os.environ.get(OUT_ROOT_ENV)
        if not root:
            raise ValueError(f"no --out given and {OUT_ROOT_ENV} is not set")
        if seed is None:
            seed = getattr(args, "seed", 0)
        out = Path(root) / f"{command}-seed{seed}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _data_job(args) -> dict:
    if getattr(args, "data", None):
        root = Path(args.data).resolve()
        if not root.is_dir():
            raise ValueError(f"dataset root '{root}' is not a directory")
        return {"kind": "folder", "root": str(root), "hash": _hash_folder(root)}
    if getattr(args, "synthetic", None):
        data_seed = args.data_seed
        if data_seed is None:
            data_seed = getattr(args, "seed", None) or 0
        return {"kind": "synthetic", "task": {
            "kind": args.synthetic, "image_size": args.image_size,
            "n_a": args.count_a, "n_b": args.count_b, "seed": data_seed,
        }}
    raise ValueError("no dataset: give --data ROOT or --synthetic KIND")


def _load_data(job: dict) -> UnpairedDataset:
    if job["kind"] == "folder":
        root = Path(job["root"])
        actual = _hash_folder(root)
        if actual != job["hash"]:
            raise ValueError(
                f"dataset at '{root}' changed since the manifest was written "
                f"(hash {actual[:12]} != {job['hash'][:12]})")
        return load_dataset_root(root)
    task = SyntheticTask(**job["task"])
    return generate_synthetic(task)


def _read_spec_file(path: str):
    text = Path(path).read_text(encoding="utf-8")
    return decode_spec(text)


# ---------------------------------------------------------------------------
# job runners (shared between first runs and replays)


def _run_search_job(job: dict, out: Path) -> list[str]:
    config = SearchConfig.from_dict(job["config"])
    data = _load_data(job["data"])
    result = run_search(config, data)
    outputs = []
    for key, fname in SPEC_FILES.items():
        (out / fname).write_text(encode_spec(result.specs[key]), encoding="utf-8")
        outputs.append(fname)
    _write_json(out / "alphas.json",
                {key: table.to_json_dict() for key, table in result.alpha_tables.items()})
    write_metrics_csv(result.records, out / "metrics.csv")
    _write_json(out / "events.json", result.events)
    outputs += ["alphas.json", "metrics.csv", "events.json"]
    return outputs


def _run_gendata_job(job: dict, out: Path) -> list[str]:
    task = SyntheticTask(**job["task"])
    write_dataset(generate_synthetic(task), out)
    return ["trainA", "trainB"]


def _run_discretize_job(job: dict, out: Path) -> list[str]:
    outputs = []
    for key, fname in SPEC_FILES.items():
        table = AlphaTable.from_json_dict(job["alphas"][key])
        n = len(table.cells) if table.role == GENERATOR else None
        spec = discretize(table.role, n, table, hidden_dim=job["hidden_dim"])
        (out / fname).write_text(encode_spec(spec), encoding="utf-8")
        outputs.append(fname)
    return outputs


def _run_train_job(job: dict, out: Path) -> list[str]:
    data = _load_data(job["data"])
    specs = {key: decode_spec(json.dumps(doc)) for key, doc in job["specs"].items()}
    result = ev.train_discrete(
        specs["g_a"], specs["g_b"], job["hidden_dim"], data, job["epochs"],
        weights=LossWeights(*job["weights"]), seed=job["seed"],
        spec_da=specs.get("d_a"), spec_db=specs.get("d_b"))
    nw.save_weights(out / "checkpoint.bin", result.named_weights())
    write_metrics_csv(result.records, out / "metrics.csv")
    return ["checkpoint.bin", "metrics.csv"]


def _run_eval_job(job: dict, out: Path) -> list[str]:
    if job["mode"] == "dirs":
        from .data import load_image_folder
        set_x = load_image_folder(Path(job["dir_x"]), "X")
        set_y = load_image_folder(Path(job["dir_y"]), "Y")
        _write_json(out / "report.json", {"distance": ev.proxy_frechet(set_x, set_y)})
        return ["report.json"]
    data = _load_data(job["data"])
    specs = {key: decode_spec(json.dumps(doc)) for key, doc in job["specs"].items()}
    channels = data.image_shape[0]
    nets = {
        "g_a": nw.instantiate_discrete(specs["g_a"], job["hidden_dim"], image_channels=channels),
        "g_b": nw.instantiate_discrete(specs["g_b"], job["hidden_dim"], image_channels=channels),
    }
    arrays = nw.load_weights(job["checkpoint"])
    for key, net in nets.items():
        nw.assign_weights(net, arrays, prefix=f"{key}.")
    report = ev.evaluate_pair(nets, data, seed=job.get("seed", 0),
                              epochs=job.get("epochs", 0))
    _write_json(out / "report.json", report.to_json_dict())
    outputs = ["report.json"]
    if job.get("results_csv"):
        ev.append_results_csv(job["results_csv"], job.get("scheme_label", "-"),
                              specs["g_a"].n, job["hidden_dim"], report)
    return outputs


_RUNNERS = {
    "search": _run_search_job,
    "gendata": _run_gendata_job,
    "discretize": _run_discretize_job,
    "train": _run_train_job,
    "eval": _run_eval_job,
}


# ---------------------------------------------------------------------------
# command handlers


# precedence: explicit flags > config-file values > these defaults
_SEARCH_DEFAULTS = {"scheme": "of", "n_cells": 5, "h_search": 8, "epochs": 20,
                    "swap_epoch": None, "weights": [1.0, 1.0, 10.0, 5.0, 5.0],
                    "seed": 0, "saturating_adversarial": False}


def _effective_search_config(args) -> SearchConfig:
    effective = dict(_SEARCH_DEFAULTS)
    if args.config:
        file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = sorted(set(file_values) - set(_SEARCH_DEFAULTS))
        if unknown:
            raise ValueError(f"config file has unknown fields {unknown}")
        effective.update(file_values)
    from_flags = {
        "scheme": args.scheme,
        "n_cells": args.n,
        "h_search": args.hsearch,
        "epochs": args.epochs,
        "swap_epoch": args.swap_epoch,
        "seed": args.seed,
        "saturating_adversarial": args.saturating,
        "weights": (list(LossWeights.parse(args.lambdas).as_tuple())
                    if args.lambdas is not None else None),
    }
    for key, value in from_flags.items():
        if value is not None:
            effective[key] = value
    return SearchConfig.from_dict(effective)


def _cmd_search(args) -> int:
    config = _effective_search_config(args)
    out = _resolve_out(args, "search", seed=config.seed)
    if args.data_seed is None:
        args.data_seed = config.seed
    job = {"config": config.to_dict(), "data": _data_job(args)}
    outputs = _run_search_job(job, out)
    _write_manifest(out, "search", job, outputs)
    print(f"search artifacts written to {out}")
    return EXIT_OK


def _cmd_space_size(args) -> int:
    gen = search_space_size(GENERATOR, args.n)
    print(f"{gen} ≈ {scientific(gen)}")
    if args.full:
        disc = search_space_size("discriminator")
        print(f"{disc} ≈ {scientific(disc)}")
        full = search_space_size("full_system", args.n)
        print(f"{full} ≈ {scientific(full)}")
    return EXIT_OK


def _cmd_gendata(args) -> int:
    out = _resolve_out(args, "gendata")
    job = {"task": {"kind": args.task, "image_size": args.size,
                    "n_a": args.count_a, "n_b": args.count_b, "seed": args.seed}}
    outputs = _run_gendata_job(job, out)
    _write_manifest(out, "gendata", job, outputs)
    print(f"dataset written to {out}")
    return EXIT_OK


def _cmd_discretize(args) -> int:
    out = _resolve_out(args, "discretize")
    alphas = json.loads(Path(args.alphas).read_text(encoding="utf-8"))
    missing = [key for key in SPEC_FILES if key not in alphas]
    if missing:
        raise SpecError(f"alpha snapshot is missing tables for {missing}")
    job = {"alphas": alphas, "hidden_dim": args.hidden}
    outputs = _run_discretize_job(job, out)
    _write_manifest(out, "discretize", job, outputs)
    print(f"specs written to {out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    out = _resolve_out(args, "train")
    specs = {"g_a": json.loads(Path(args.spec_ga).read_text()),
             "g_b": json.loads(Path(args.spec_gb).read_text())}
    if args.spec_da:
        specs["d_a"] = json.loads(Path(args.spec_da).read_text())
    if args.spec_db:
        specs["d_b"] = json.loads(Path(args.spec_db).read_text())
    for key, doc in specs.items():
        decode_spec(json.dumps(doc))  # validate early, with position info
    job = {"specs": specs, "hidden_dim": args.hidden, "epochs": args.epochs,
           "seed": args.seed, "weights": list(LossWeights.parse(args.lambdas).as_tuple()),
           "data": _data_job(args)}
    outputs = _run_train_job(job, out)
    _write_manifest(out, "train", job, outputs)
    print(f"training artifacts written to {out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    out = _resolve_out(args, "eval")
    if args.set_x or args.set_y:
        if not (args.set_x and args.set_y):
            raise ValueError("give both --set-x and --set-y for a raw distance")
        job = {"mode": "dirs", "dir_x": str(Path(args.set_x).resolve()),
               "dir_y": str(Path(args.set_y).resolve())}
    else:
        if not (args.checkpoint and args.spec_ga and args.spec_gb):
            raise ValueError(
                "model evaluation needs --checkpoint, --spec-ga and --spec-gb "
                "(or use --set-x/--set-y for a raw distance)")
        specs = {"g_a": json.loads(Path(args.spec_ga).read_text()),
                 "g_b": json.loads(Path(args.spec_gb).read_text())}
        for doc in specs.values():
            decode_spec(json.dumps(doc))
        job = {"mode": "model", "specs": specs,
               "checkpoint": str(Path(args.checkpoint).resolve()),
               "checkpoint_hash": _sha256_file(Path(args.checkpoint)),
               "hidden_dim": args.hidden, "data": _data_job(args),
               "results_csv": args.results_csv, "scheme_label": args.scheme_label,
               "seed": args.seed}
    outputs = _run_eval_job(job, out)
    _write_manifest(out, "eval", job, outputs)
    print(f"evaluation written to {out}")
    return EXIT_OK


def _cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    command = manifest.get("command")
    if command not in _RUNNERS:
        raise ValueError(f"manifest has unknown command '{command}'")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = _RUNNERS[command](manifest["job"], out)
    _write_manifest(out, command, manifest["job"], outputs)
    print(f"replayed '{command}' into {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="dataset root with trainA/ and trainB/")
    p.add_argument("--synthetic", choices=("color_swap", "texture_asym"),
                   help="generate a synthetic task instead of loading folders")
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--count-a", type=int, default=16)
    p.add_argument("--count-b", type=int, default=16)
    p.add_argument("--data-seed", type=int, default=None,
                   help="seed for synthetic data (defaults to --seed)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cyclenas")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="run an architecture search")
    p.add_argument("--config", help="JSON file with search-config fields; flags override it")
    p.add_argument("--scheme", choices=SCHEMES, default=None)
    p.add_argument("--n", type=int, default=None, help="cells per generator")
    p.add_argument("--hsearch", type=int, default=None, help="hidden dimension during search")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--swap-epoch", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--lambdas", default=None)
    p.add_argument("--saturating", action="store_const", const=True, default=None)
    p.add_argument("--out")
    _add_data_flags(p)
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("space-size", help="print exact search-space cardinalities")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--full", action="store_true",
                   help="also print discriminator and full-system sizes")
    p.set_defaults(func=_cmd_space_size)

    p = sub.add_parser("gendata", help="write a synthetic dataset as PNG folders")
    p.add_argument("--task", choices=("color_swap", "texture_asym"), required=True)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--count-a", type=int, default=16)
    p.add_argument("--count-b", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_gendata)

    p = sub.add_parser("discretize", help="turn an alpha snapshot into discrete specs")
    p.add_argument("--alphas", required=True)
    p.add_argument("--hidden", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_discretize)

    p = sub.add_parser("train", help="train discrete architectures")
    p.add_argument("--spec-ga", required=True)
    p.add_argument("--spec-gb", required=True)
    p.add_argument("--spec-da")
    p.add_argument("--spec-db")
    p.add_argument("--hidden", type=int, required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambdas", default="1,1,10,5,5")
    p.add_argument("--out")
    _add_data_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score sets or trained generators")
    p.add_argument("--set-x", help="raw mode: first image folder")
    p.add_argument("--set-y", help="raw mode: second image folder")
    p.add_argument("--checkpoint")
    p.add_argument("--spec-ga")
    p.add_argument("--spec-gb")
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--results-csv")
    p.add_argument("--scheme-label", default="-")
    p.add_argument("--out")
    _add_data_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SpecError, ValueError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
