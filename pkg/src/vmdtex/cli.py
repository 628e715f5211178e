"""``vmdtex`` command-line interface.

Every subcommand reads one TOML config and writes its artifacts below
``output_dir``::

    manifest.csv          index
    components/           decompose  (float32 rasters + JSON sidecars)
    features.csv          extract
    selection.json        select
    model.json            train
    report.json/.csv      evaluate

CSV artifacts get a ``<name>.meta.json`` sidecar carrying the seed.  Errors
print one JSON object on stderr and exit with 2 (config), 3 (data) or
4 (numerical).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path

from . import __version__
from .artifacts import FeatureTable, atomic_write, dump_components, write_json
from .config import PipelineConfig, load_config, parse_magnification
from .dataset import Manifest, build_manifest
from .errors import ConfigError, DataError, VmdTexError
from .evaluation import fit_fold, neighbour_count, run_experiment, summary_table
from .pipeline import compute_features, decompose_sample
from .selection import FeatureMatrix, relieff, significance_filter
from .synthetic import generate_synthetic_dataset

log = logging.getLogger("vmdtex")

MANIFEST = "manifest.csv"
FEATURES = "features.csv"
SELECTION = "selection.json"
MODEL = "model.json"
REPORT = "report.json"
REPORT_CSV = "report.csv"
SYNTHETIC_DIR = "synthetic_data"


def _meta(config: PipelineConfig, command: str) -> dict:
    return {"command": command, "seed": config.seed, "version": __version__}


def _write_csv(path: Path, text: str, config: PipelineConfig, command: str) -> Path:
    atomic_write(path, text)
    write_json(path.with_name(path.name + ".meta.json"), _meta(config, command))
    return path


def _require(path: Path, producer: str) -> str:
    if not path.exists():
        raise DataError(f"{path} not found; run `vmdtex {producer}` first")
    return path.read_text(encoding="utf-8")


def dataset_root(config: PipelineConfig) -> Path:
    if config.dataset.root:
        return Path(config.dataset.root)
    return config.output_path / SYNTHETIC_DIR


def _ensure_synthetic(config: PipelineConfig) -> Path:
    """Generate the synthetic corpus once per parameter set.

    The corpus is built in a scratch directory and renamed into place, so an
    interrupted run leaves nothing behind that looks complete.
    """
    ds = config.dataset
    root = dataset_root(config)
    params = {
        "patients_per_class": ds.synthetic_patients_per_class,
        "images_per_patient": ds.synthetic_images_per_patient,
        "size": list(ds.synthetic_size),
        "seed": config.seed,
    }
    stamp = root / "synthetic.json"
    if stamp.exists() and json.loads(stamp.read_text()) == params:
        return root
    root.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(dir=root.parent, prefix=f".{root.name}."))
    try:
        generate_synthetic_dataset(
            scratch, params["patients_per_class"], params["images_per_patient"], tuple(params["size"]), config.seed
        )
        write_json(scratch / "synthetic.json", params)
        if root.exists():
            shutil.rmtree(root)
        os.replace(scratch, root)
    finally:
        if scratch.exists():
            shutil.rmtree(scratch)
    return root


def _load_manifest(config: PipelineConfig) -> Manifest:
    manifest = Manifest.from_csv(_require(config.output_path / MANIFEST, "index"))
    mag = config.dataset.magnification
    return manifest.filter(magnification=mag) if isinstance(mag, int) else manifest


def _load_features(config: PipelineConfig, manifest: Manifest) -> FeatureTable:
    table = FeatureTable.from_csv(_require(config.output_path / FEATURES, "extract"))
    index = {sid: i for i, sid in enumerate(table.sample_ids)}
    missing = [s.sample_id for s in manifest.samples if s.sample_id not in index]
    if missing:
        raise DataError(f"{len(missing)} samples lack features (e.g. {missing[0]}); rerun `vmdtex extract`")
    return table


def _training_matrix(config: PipelineConfig) -> FeatureMatrix:
    manifest = _load_manifest(config)
    table = _load_features(config, manifest)
    index = {sid: i for i, sid in enumerate(table.sample_ids)}
    rows = [index[s.sample_id] for s in manifest.samples]
    return FeatureMatrix(table.values[rows], table.names, [table.labels[i] for i in rows])


# -- commands --------------------------------------------------------------

def cmd_index(root: str | os.PathLike, out: str | os.PathLike, config: PipelineConfig | None = None) -> Path:
    """Scan ``root`` and write the manifest CSV to ``out``."""
    manifest = build_manifest(root)
    out = Path(out)
    if config is None:
        atomic_write(out, manifest.to_csv())
    else:
        _write_csv(out, manifest.to_csv(), config, "index")
    log.info("indexed %d images from %d patients", len(manifest), len(manifest.patients))
    return out


def cmd_decompose(config: PipelineConfig, samples: list[str] | None = None) -> list[Path]:
    """Decompose images (paths or manifest sample ids; default every manifest entry)."""
    targets: list[str]
    if samples:
        by_id = None
        targets = []
        for s in samples:
            if Path(s).is_file():
                targets.append(s)
                continue
            if by_id is None:
                by_id = {m.sample_id: m.path for m in _load_manifest(config).samples}
            if s not in by_id:
                raise DataError(f"{s!r} is neither an image file nor a manifest sample id")
            targets.append(by_id[s])
    else:
        targets = [m.path for m in _load_manifest(config).samples]
    out_dir = config.output_path / "components"
    written: list[Path] = []
    for path in targets:
        tree = decompose_sample(path, config)
        if tree.truncated:
            log.warning("%s: decomposition truncated, trailing components are zero", path)
        written += dump_components(tree, out_dir, Path(path).stem, meta={"seed": config.seed})
    return written


def cmd_extract(config: PipelineConfig) -> Path:
    manifest = _load_manifest(config)
    table = compute_features(manifest, config)
    return _write_csv(config.output_path / FEATURES, table.to_csv(), config, "extract")


def cmd_select(config: PipelineConfig) -> Path:
    matrix = _training_matrix(config)
    k = neighbour_count(matrix.labels, config.selection.k_neighbors)
    ranked = relieff(matrix, k_neighbors=k, seed=config.seed)
    ranked = significance_filter(matrix, ranked, config.selection.p_threshold, config.selection.fallback_top)
    payload = {"seed": config.seed, "k_neighbors": k, "n_samples": len(matrix.labels), **ranked.report()}
    return write_json(config.output_path / SELECTION, payload)


def cmd_train(config: PipelineConfig) -> Path:
    matrix = _training_matrix(config)
    model, info = fit_fold(matrix, config, config.seed)
    payload = {**model.to_dict(), "seed": config.seed, "training": info}
    return write_json(config.output_path / MODEL, payload)


def cmd_evaluate(config: PipelineConfig) -> tuple[Path, Path]:
    manifest = _load_manifest(config)
    features = _load_features(config, manifest)
    report = run_experiment(manifest, config, features)
    json_path = write_json(config.output_path / REPORT, report)
    csv_path = _write_csv(config.output_path / REPORT_CSV, summary_table(report), config, "evaluate")
    return json_path, csv_path


def cmd_report(report_path: str | os.PathLike) -> str:
    path = Path(report_path)
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DataError(f"{path} not found; run `vmdtex evaluate` first") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc
    if "rows" not in report:
        raise DataError(f"{path} is not a vmdtex report")
    return summary_table(report)


# -- entry point -----------------------------------------------------------

COMMANDS = ("index", "decompose", "extract", "select", "train", "evaluate", "report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vmdtex", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"vmdtex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--mag", help="40, 100, 200, 400 or all")
        p.add_argument("--jobs", type=int, help="worker processes (0 = all cores)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "decompose":
            p.add_argument("samples", nargs="*", help="image paths or sample ids (default: whole manifest)")
        if name == "report":
            p.add_argument("--report", help="report JSON (default: <output_dir>/report.json)")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.mag is not None:
        config.dataset.magnification = parse_magnification(args.mag)
    if args.jobs is not None:
        if args.jobs < 0:
            raise ConfigError("--jobs must be >= 0")
        config.jobs = args.jobs
    return config


def run(args: argparse.Namespace) -> None:
    config = resolve_config(args)
    out = config.output_path
    if args.command == "index":
        root = _ensure_synthetic(config) if config.dataset.synthetic else dataset_root(config)
        print(cmd_index(root, out / MANIFEST, config))
    elif args.command == "decompose":
        written = cmd_decompose(config, args.samples)
        print(f"wrote {len(written)} files to {out / 'components'}")
    elif args.command == "extract":
        print(cmd_extract(config))
    elif args.command == "select":
        print(cmd_select(config))
    elif args.command == "train":
        print(cmd_train(config))
    elif args.command == "evaluate":
        for p in cmd_evaluate(config):
            print(p)
    elif args.command == "report":
        sys.stdout.write(cmd_report(args.report or out / REPORT))


def error_line(exc: BaseException) -> str:
    return json.dumps(
        {"error": type(exc).__name__, "exit_code": getattr(exc, "exit_code", 1), "message": str(exc)},
        sort_keys=True,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        run(args)
    except VmdTexError as exc:
        print(error_line(exc), file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
