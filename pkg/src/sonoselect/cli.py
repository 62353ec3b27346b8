"""Batch command-line interface.

Subcommands mirror the pipeline stages (`synth`, `preprocess`, `endstates`,
`score`, `select`, `classify`) plus `pipeline`, which chains them through the
same file artifacts so that manual stage composition and the one-shot run
produce byte-identical outputs.  Exit codes: 0 success, 1 pipeline/data
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import classify as _classify
from . import scoring as _scoring
from . import selection as _selection
from . import synthgen as _synthgen
from .endstate import ValleyParams, build_dataset
from .preprocess import NormalizationScope, PreprocessConfig, preprocess_sequence
from .seqio import (
    FrameKind,
    ScoreMethod,
    format_score,
    read_dataset,
    read_scores,
    read_sequence,
    write_dataset,
    write_scores,
    write_sequence,
)


class StageError(Exception):
    """Wraps a failure with the pipeline stage where it happened."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    """Run configuration; JSON config files hold the same keys, CLI flags win."""

    n_motions: int = 5
    labels: tuple[str, ...] | None = None
    smoothing_window: int = 5
    min_separation: int | None = None
    min_prominence: float = 0.1
    mi_bins: int = 32
    metric: str = "euclidean"
    normalization_scope: str = "per_frame"
    subset_counts: tuple[int, ...] = (4, 8, 16)
    strategy: str = "dss"
    count: int = 4

    @classmethod
    def load(cls, path: Path | None) -> "PipelineConfig":
        cfg = cls()
        if path is None:
            return cfg
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            raise StageError("config", err) from err
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise StageError("config", ValueError(f"unknown config keys: {sorted(unknown)}"))
        for key, value in data.items():
            if key in ("labels", "subset_counts") and value is not None:
                value = tuple(value)
            setattr(cfg, key, value)
        return cfg

    def valley_params(self) -> ValleyParams:
        return ValleyParams(
            n_motions=self.n_motions,
            smoothing_window=self.smoothing_window,
            min_separation=self.min_separation,
            min_prominence=self.min_prominence,
        )

    def motion_labels(self) -> tuple[str, ...]:
        if self.labels is not None:
            return tuple(self.labels)
        return tuple(f"motion_{i}" for i in range(self.n_motions))

    def distance_metric(self) -> _classify.DistanceMetric:
        return _classify.DistanceMetric(self.metric)


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as err:
        raise StageError(name, err) from err


# ---------------------------------------------------------------------------
# stage runners (file -> file, shared by stage commands and `pipeline`)
# ---------------------------------------------------------------------------


def run_synth(cfg: _synthgen.PhantomConfig, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    trials, truth = _stage("generate", _synthgen.generate, cfg)
    paths = []
    for t, (seq, _labels) in enumerate(trials):
        path = out_dir / f"trial_{t:03d}.smg1"
        n_bytes = _stage("write_sequence", write_sequence, seq, path)
        print(f"trial {t}: {seq.n_frames} frames {seq.m}x{seq.d} -> {path} ({n_bytes} bytes)")
        paths.append(path)
    truth_path = out_dir / "truth.json"
    _stage("write_truth", _synthgen.write_truth, truth, cfg, truth_path)
    print(f"truth -> {truth_path}")
    return paths


def run_preprocess(inputs: list[Path], out_dir: Path, scope: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = PreprocessConfig(NormalizationScope(scope))
    paths = []
    for src in inputs:
        seq = _stage("read_sequence", read_sequence, src)
        bmode = _stage("preprocess", preprocess_sequence, seq, cfg)
        path = out_dir / (Path(src).stem + "_bmode.smg1")
        _stage("write_sequence", write_sequence, bmode, path)
        print(f"{src} -> {path}")
        paths.append(path)
    return paths


def run_endstates(inputs: list[Path], out_dir: Path, cfg: PipelineConfig) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = cfg.motion_labels()
    params = cfg.valley_params()
    trials = []
    for src in inputs:
        seq = _stage("read_sequence", read_sequence, src)
        if seq.kind == FrameKind.RF:
            seq = _stage(
                "preprocess",
                preprocess_sequence,
                seq,
                PreprocessConfig(NormalizationScope(cfg.normalization_scope)),
            )
        trials.append((seq, labels))
    ds = _stage("endstates", build_dataset, trials, params)
    path = out_dir / "dataset.smgd"
    _stage("write_dataset", write_dataset, ds, path)
    print(f"dataset: n={ds.n} k={ds.k} m={ds.m} d={ds.d} -> {path}")
    return path


def run_score(dataset_path: Path, out_dir: Path, methods: list[ScoreMethod], mi_bins: int) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = _stage("read_dataset", read_dataset, dataset_path)
    mi_cfg = _scoring.MiConfig(bin_count=mi_bins)
    paths = {}
    for method in methods:
        scores = _stage("score", _scoring.score_matrix, ds, method, mi_cfg)
        path = out_dir / f"scores_{method.value}.csv"
        _stage("write_scores", write_scores, scores, path)
        print(f"scores ({method.value}) -> {path}")
        paths[method] = path
    return paths


def _subset_from_scores(
    scores_path: Path, strategy: _selection.SubsetStrategy, count: int, smoothing_window: int
) -> _selection.ScanlineSubset:
    table = read_scores(Path(scores_path))
    if strategy == _selection.SubsetStrategy.UDSS:
        return _selection.udss(table.m, count)
    col_sums = table.averaged.sum(axis=0)
    peak = col_sums.max(initial=0.0)
    values = col_sums / peak if peak > 0 else col_sums * 0.0
    method = ScoreMethod.FC if strategy == _selection.SubsetStrategy.DSS else ScoreMethod.MI
    agg = _scoring.AggregatedScore(method=method, values=values)
    polarity = (
        _selection.Polarity.MAXIMA
        if strategy == _selection.SubsetStrategy.DSS
        else _selection.Polarity.MINIMA
    )
    return _selection.extrema_select(agg, count, polarity, smoothing_window)


def run_select(
    out_dir: Path,
    strategy: str,
    count: int,
    scores_path: Path | None,
    m: int | None,
    smoothing_window: int,
    tag: str | None = None,
) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    strat = _selection.SubsetStrategy(strategy)
    if strat == _selection.SubsetStrategy.UDSS and scores_path is None:
        if m is None:
            raise StageError("select", ValueError("udss needs --m or --scores to know m"))
        subset = _stage("select", _selection.udss, m, count)
    else:
        if scores_path is None:
            raise StageError("select", ValueError(f"{strategy} needs --scores"))
        subset = _stage("select", _subset_from_scores, scores_path, strat, count, smoothing_window)
    path = out_dir / f"subset_{tag or strategy}_{count}.json"
    path.write_text(subset.to_json(), encoding="utf-8")
    print(f"subset ({strategy}, {count}) -> {path}")
    return path


def run_classify(
    dataset_path: Path, subset_path: Path, out_dir: Path, metric: _classify.DistanceMetric
) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = _stage("read_dataset", read_dataset, dataset_path)
    subset = _stage(
        "read_subset",
        _selection.ScanlineSubset.from_json,
        Path(subset_path),
    )
    cm = _stage("classify", _classify.loocv, ds, subset, metric)
    stem = Path(subset_path).stem
    tag = stem[len("subset_"):] if stem.startswith("subset_") else stem
    cm_path = out_dir / f"confusion_{tag}.csv"
    cm_path.write_text(_classify.confusion_csv(cm), encoding="utf-8")
    summary_path = out_dir / f"summary_{tag}.json"
    summary_path.write_text(_classify.summary_json(cm, subset, metric), encoding="utf-8")
    stats = _classify.accuracy(cm)
    print(f"classify {tag}: overall accuracy {stats.overall:.4f} -> {cm_path}")
    return cm_path, summary_path


def run_pipeline(inputs: list[Path], out_dir: Path, cfg: PipelineConfig) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset_path = run_endstates(inputs, out_dir, cfg)
    score_paths = run_score(dataset_path, out_dir, [ScoreMethod.FC, ScoreMethod.MI], cfg.mi_bins)
    ds = _stage("read_dataset", read_dataset, dataset_path)
    metric = cfg.distance_metric()

    rows = []

    def evaluate(tag: str, count: int, subset_path: Path):
        _, summary_path = run_classify(dataset_path, subset_path, out_dir, metric)
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
        rows.append((tag, count, summary["overall"], summary["per_class"]))

    full_path = run_select(
        out_dir, "udss", ds.m, None, ds.m, cfg.smoothing_window, tag="full"
    )
    evaluate("full", ds.m, full_path)
    for strategy in ("udss", "dss", "css"):
        scores_path = None
        if strategy == "dss":
            scores_path = score_paths[ScoreMethod.FC]
        elif strategy == "css":
            scores_path = score_paths[ScoreMethod.MI]
        else:
            scores_path = score_paths[ScoreMethod.FC]  # only used to read m
        for count in cfg.subset_counts:
            subset_path = run_select(
                out_dir, strategy, count, scores_path, ds.m, cfg.smoothing_window
            )
            evaluate(strategy, count, subset_path)

    labels = list(ds.labels)
    header = "strategy,count,overall_accuracy," + ",".join(f"per_class_{s}" for s in labels)
    lines = [header]
    for tag, count, overall, per_class in rows:
        cells = [tag, str(count), format_score(overall)]
        cells += [format_score(per_class[label]) for label in labels]
        lines.append(",".join(cells))
    report_path = out_dir / "report.csv"
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"report -> {report_path}")
    return report_path


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sonoselect",
        description="Scanline discriminability scoring, subset selection and motion classification.",
    )
    parser.add_argument("--config", type=Path, help="JSON pipeline config file")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")
    parser.add_argument("--seed", type=int, help="seed override for synth")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate phantom trials plus ground truth")
    p.add_argument("--profile", choices=["easy", "noisy"], default="easy")

    p = sub.add_parser("preprocess", help="convert RF sequences to B-mode")
    p.add_argument("inputs", nargs="+", type=Path)
    p.add_argument("--scope", choices=["per_frame", "per_sequence"], default=None)

    p = sub.add_parser("endstates", help="extract end-state frames into a dataset")
    p.add_argument("inputs", nargs="+", type=Path)
    p.add_argument("--n-motions", type=int, default=None)
    p.add_argument("--labels", type=str, default=None, help="comma-separated motion labels")

    p = sub.add_parser("score", help="compute FC/MI score matrices")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--method", choices=["fc", "mi", "both"], default="both")
    p.add_argument("--mi-bins", type=int, default=None)

    p = sub.add_parser("select", help="choose a scanline subset")
    p.add_argument("--scores", type=Path, default=None)
    p.add_argument("--strategy", choices=["udss", "dss", "css"], default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--m", type=int, default=None, help="scanline count (udss without --scores)")

    p = sub.add_parser("classify", help="LOOCV over a dataset and subset")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--subset", type=Path, required=True)
    p.add_argument("--metric", choices=["euclidean", "one_minus_cc"], default=None)

    p = sub.add_parser("pipeline", help="full protocol: endstates, scores, subsets, LOOCV report")
    p.add_argument("inputs", nargs="+", type=Path)
    p.add_argument("--n-motions", type=int, default=None)
    p.add_argument("--labels", type=str, default=None)
    p.add_argument("--metric", choices=["euclidean", "one_minus_cc"], default=None)

    return parser


def _merge_flags(cfg: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    if getattr(args, "n_motions", None) is not None:
        cfg.n_motions = args.n_motions
    if getattr(args, "labels", None) is not None:
        cfg.labels = tuple(s.strip() for s in args.labels.split(",") if s.strip())
        cfg.n_motions = len(cfg.labels)
    if getattr(args, "metric", None) is not None:
        cfg.metric = args.metric
    if getattr(args, "mi_bins", None) is not None:
        cfg.mi_bins = args.mi_bins
    if getattr(args, "scope", None) is not None:
        cfg.normalization_scope = args.scope
    if getattr(args, "strategy", None) is not None:
        cfg.strategy = args.strategy
    if getattr(args, "count", None) is not None:
        cfg.count = args.count
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _merge_flags(PipelineConfig.load(args.config), args)
        out_dir = args.out
        if args.command == "synth":
            phantom = _synthgen.default_config(args.profile)
            if args.seed is not None:
                phantom = dataclasses.replace(phantom, seed=args.seed)
            run_synth(phantom, out_dir)
        elif args.command == "preprocess":
            run_preprocess(args.inputs, out_dir, cfg.normalization_scope)
        elif args.command == "endstates":
            run_endstates(args.inputs, out_dir, cfg)
        elif args.command == "score":
            methods = {
                "fc": [ScoreMethod.FC],
                "mi": [ScoreMethod.MI],
                "both": [ScoreMethod.FC, ScoreMethod.MI],
            }[args.method]
            run_score(args.dataset, out_dir, methods, cfg.mi_bins)
        elif args.command == "select":
            run_select(out_dir, cfg.strategy, cfg.count, args.scores, args.m, cfg.smoothing_window)
        elif args.command == "classify":
            run_classify(args.dataset, args.subset, out_dir, cfg.distance_metric())
        elif args.command == "pipeline":
            run_pipeline(args.inputs, out_dir, cfg)
        else:  # pragma: no cover - argparse enforces choices
            raise AssertionError(args.command)
    except StageError as err:
        print(f"error in {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
