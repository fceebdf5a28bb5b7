"""Batch front-end: synth / ingest / encode / augment / train / evaluate / report.

Runs are driven by a flat key=value config file validated against the
schema below; unknown keys are rejected. Exit codes: 0 success, 2 config
error, 3 data error, 4 numeric divergence. On failure a single
machine-parsable line ``error-class=<Name>`` goes to stdout and the
human-readable detail to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from drawnet import gdt, net
from drawnet.augment import AugmentPlan, expand_dataset
from drawnet.encode import EncodeConfig
from drawnet.errors import (
    ConfigError,
    DataError,
    DrawnetError,
    NonFiniteLogit,
    NumericDivergence,
    PlanInvalidForDimension,
)
from drawnet.ingest import FeatureSet, load_manifest
from drawnet.synthetic import gen_cohort, write_cohort
from drawnet.trainer import (
    METRICS_CSV_HEADER,
    TrainConfig,
    encode_records,
    evaluate,
    metrics_csv_row,
    run_pipeline,
    write_metrics_csv,
)


@dataclass
class RunConfig:
    manifest: str = ""
    dimension: int = 2
    features: str = "xyalpv"
    series_length: int = 128
    image_size: int = 128
    voxel_resolution: int = 128
    line_width_min: int = 1
    line_width_max: int = 7
    margin: int = 1
    augment: str = "flip,rotation,illumination,jitter"
    rotation_angles: str = "90,180,270"
    illumination_delta: float = 0.1
    jitter_sigma: float = 0.01
    multiplicity: int = 4
    lr: float = 1e-4
    epochs: int = 100
    batch_size: int = 8
    val_fraction: float = 0.2
    test_fraction: float = 0.2
    seed: int = 0
    surface_filter: str = "auto"
    n_pd: int = 40
    n_hc: int = 40
    out_dir: str = ""

    def feature_set(self) -> FeatureSet:
        try:
            fs = FeatureSet.from_letters(self.features)
        except DataError as exc:
            raise ConfigError(str(exc)) from exc
        if self.dimension == 3 and not fs.velocity:
            raise PlanInvalidForDimension(
                "velocity is mandatory for 3D encodings (it supplies the z axis)"
            )
        return fs

    def encode_cfg(self) -> EncodeConfig:
        try:
            return EncodeConfig(
                length=self.series_length,
                height=self.image_size,
                width=self.image_size,
                resolution=self.voxel_resolution,
                line_width_min=self.line_width_min,
                line_width_max=self.line_width_max,
                margin=self.margin,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def augment_plan(self) -> AugmentPlan | None:
        families = frozenset(f.strip() for f in self.augment.split(",") if f.strip())
        if not families:
            return None
        try:
            angles = tuple(int(a) for a in self.rotation_angles.split(",") if a.strip())
            return AugmentPlan(
                families=families,
                rotation_angles=angles,
                illumination_delta=self.illumination_delta,
                jitter_sigma=self.jitter_sigma,
                seed=self.seed,
                multiplicity=self.multiplicity,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def train_cfg(self) -> TrainConfig:
        try:
            return TrainConfig(
                lr=self.lr,
                epochs=self.epochs,
                batch_size=self.batch_size,
                seed=self.seed,
                val_fraction=self.val_fraction,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def surface_flag(self) -> bool | None:
        table = {"auto": None, "on": True, "off": False}
        if self.surface_filter not in table:
            raise ConfigError(f"surface_filter must be auto/on/off, got {self.surface_filter!r}")
        return table[self.surface_filter]


def parse_runconfig(path: str | Path) -> RunConfig:
    """Parse a key = value file; every key must exist in RunConfig."""
    known = {f.name: f.type for f in fields(RunConfig)}
    types = {"int": int, "float": float, "str": str}
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = types[known[key]](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {value!r}") from exc
    cfg = RunConfig(**values)
    if cfg.dimension not in (1, 2, 3):
        raise ConfigError(f"dimension must be 1, 2 or 3, got {cfg.dimension}")
    return cfg


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    out = override or cfg.out_dir
    if not out:
        raise ConfigError("no output directory: set out_dir or pass --out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_records(cfg: RunConfig):
    if not cfg.manifest:
        raise ConfigError("config key 'manifest' is required for this command")
    return load_manifest(cfg.manifest, surface_filter=cfg.surface_flag())


def cmd_synth(cfg: RunConfig, out: str | None) -> int:
    out_path = _out_dir(cfg, out)
    manifest, records = gen_cohort(cfg.n_pd, cfg.n_hc, cfg.seed)
    manifest_path = write_cohort(out_path, manifest, records)
    counts = manifest.class_counts()
    print(f"wrote {len(records)} records to {manifest_path} "
          f"(PD={counts['PD']} HC={counts['HC']})")
    return 0


def cmd_ingest(cfg: RunConfig) -> int:
    manifest, records = _load_records(cfg)
    counts = manifest.class_counts()
    print(f"records={len(records)} PD={counts['PD']} HC={counts['HC']}")
    return 0


def _write_index(path: Path, rows: list[tuple[str, ...]]) -> None:
    lines = ["\t".join(row) for row in rows]
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


def cmd_encode(cfg: RunConfig, out: str | None) -> int:
    out_path = _out_dir(cfg, out)
    _, records = _load_records(cfg)
    fs = cfg.feature_set()
    x, _ = encode_records(records, cfg.dimension, fs, cfg.encode_cfg())
    rows = []
    for record, values in zip(records, x):
        name = f"{record.subject_id}_{record.task_id}.gdt"
        gdt.write(out_path / name, values)
        rows.append((name, record.label, record.subject_id, record.task_id))
    _write_index(out_path / "index.tsv", rows)
    print(f"encoded {len(rows)} records (dim={cfg.dimension}) into {out_path}")
    return 0


def cmd_augment(cfg: RunConfig, out: str | None) -> int:
    # expands whatever the manifest lists; point it at a training subset
    out_path = _out_dir(cfg, out)
    _, records = _load_records(cfg)
    plan = cfg.augment_plan()
    if plan is None:
        raise ConfigError("config key 'augment' lists no families")
    examples = expand_dataset(records, plan, cfg.dimension, cfg.feature_set(), cfg.encode_cfg())
    rows = []
    for ex in examples:
        name = f"{ex.subject_id}_{ex.task_id}_{ex.provenance}.gdt"
        gdt.write(out_path / name, ex.values)
        rows.append((name, ex.label, ex.subject_id, ex.task_id))
    _write_index(out_path / "index.tsv", rows)
    print(f"wrote {len(rows)} augmented examples into {out_path}")
    return 0


def cmd_train(cfg: RunConfig, out: str | None) -> int:
    out_path = _out_dir(cfg, out)
    _, records = _load_records(cfg)
    fs = cfg.feature_set()
    result = run_pipeline(
        records,
        dim=cfg.dimension,
        fs=fs,
        encode_cfg=cfg.encode_cfg(),
        train_cfg=cfg.train_cfg(),
        plan=cfg.augment_plan(),
        test_fraction=cfg.test_fraction,
    )
    result.history.write_csv(out_path / "history.csv")
    net.save_checkpoint(result.network, out_path / "checkpoint")
    _write_index(
        out_path / "test_index.tsv",
        [(r.subject_id, r.task_id, r.label) for r in result.test_records],
    )
    write_metrics_csv(
        out_path / "metrics.csv", [metrics_csv_row(cfg.dimension, fs, result.metrics)]
    )
    run_info = {
        "dimension": cfg.dimension,
        "features": fs.letters(),
        "seed": cfg.seed,
        "epochs_run": len(result.history),
        "train_examples": result.n_train_examples,
        "test_records": len(result.test_records),
    }
    (out_path / "run.json").write_text(json.dumps(run_info, indent=2, sort_keys=True) + "\n")
    print(
        f"dim={cfg.dimension} features={fs.letters()} "
        f"test_accuracy={result.metrics.accuracy:.4f} -> {out_path}"
    )
    return 0


def cmd_evaluate(cfg: RunConfig, run_dir: str) -> int:
    run_path = Path(run_dir)
    if not (run_path / "checkpoint" / "network.json").is_file():
        raise DataError(f"no checkpoint under {run_path}")
    network = net.load_checkpoint(run_path / "checkpoint")
    _, records = _load_records(cfg)
    test_ids = set()
    for line in (run_path / "test_index.tsv").read_text().splitlines():
        if line.strip():
            subject, task, label = line.split("\t")
            test_ids.add((subject, task, label))
    test_records = [r for r in records if (r.subject_id, r.task_id, r.label) in test_ids]
    if not test_records:
        raise DataError("test_index matches no manifest records")
    fs = cfg.feature_set()
    x, y = encode_records(test_records, cfg.dimension, fs, cfg.encode_cfg())
    cm, metrics, _ = evaluate(network, x, y, cfg.batch_size)
    write_metrics_csv(
        run_path / "metrics.csv", [metrics_csv_row(cfg.dimension, fs, metrics)]
    )
    print(
        f"test records={cm.total} tp={cm.tp} fn={cm.fn} fp={cm.fp} tn={cm.tn} "
        f"accuracy={metrics.accuracy:.4f}"
    )
    return 0


def cmd_report(run_dirs: list[str], out_file: str, curves_dir: str | None = None) -> int:
    rows = []
    missing = []
    curves = 0
    for run_dir in run_dirs:
        metrics_path = Path(run_dir) / "metrics.csv"
        if not metrics_path.is_file():
            missing.append(run_dir)
            continue
        lines = metrics_path.read_text().splitlines()
        if not lines or lines[0] != ",".join(METRICS_CSV_HEADER):
            missing.append(run_dir)
            continue
        rows.extend(line.split(",") for line in lines[1:] if line.strip())
        history_path = Path(run_dir) / "history.csv"
        if curves_dir is not None and history_path.is_file():
            dest = Path(curves_dir)
            dest.mkdir(parents=True, exist_ok=True)
            (dest / f"{Path(run_dir).name}.curves.csv").write_bytes(
                history_path.read_bytes()
            )
            curves += 1
    write_metrics_csv(out_file, rows)
    for run_dir in missing:
        print(f"missing metrics: {run_dir}", file=sys.stderr)
    summary = f"report: {len(rows)} rows from {len(run_dirs) - len(missing)} runs -> {out_file}"
    if curves_dir is not None:
        summary += f" (+{curves} curve files -> {curves_dir})"
    print(summary)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drawnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, *, config: bool = True, out: bool = False):
        p = sub.add_parser(name)
        if config:
            p.add_argument("--config", required=True, help="key=value run config file")
        if out:
            p.add_argument("--out", default=None, help="output directory (overrides out_dir)")
        return p

    add("synth", out=True)
    add("ingest")
    add("encode", out=True)
    add("augment", out=True)
    add("train", out=True)
    p_eval = add("evaluate")
    p_eval.add_argument("--run", required=True, help="run directory written by train")
    p_report = sub.add_parser("report")
    p_report.add_argument("--out", required=True, help="aggregated CSV path")
    p_report.add_argument(
        "--curves", default=None,
        help="also collect each run's history.csv into this directory",
    )
    p_report.add_argument("runs", nargs="+", help="run directories to aggregate")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args.runs, args.out, args.curves)
        cfg = parse_runconfig(args.config)
        if args.command == "synth":
            return cmd_synth(cfg, args.out)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "encode":
            return cmd_encode(cfg, args.out)
        if args.command == "augment":
            return cmd_augment(cfg, args.out)
        if args.command == "train":
            return cmd_train(cfg, args.out)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.run)
        raise ConfigError(f"unknown command {args.command!r}")
    except DrawnetError as exc:
        print(f"error-class={type(exc).__name__}")
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        if isinstance(exc, (NumericDivergence, NonFiniteLogit)):
            return 4
        if isinstance(exc, ConfigError):
            return 2
        return 3
    except ValueError as exc:
        print("error-class=ValueError")
        print(str(exc), file=sys.stderr)
        return 2
    except OSError as exc:
        print("error-class=OSError")
        print(str(exc), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
