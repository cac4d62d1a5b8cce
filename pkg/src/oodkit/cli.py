"""Command-line harness: synthetic fixtures, fitting, scoring, evaluation,
hyperparameter sweeps, and epoch-series studies.

Exit codes: 0 success, 2 usage error, 3 data error, 4 fit failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from . import metrics as M
from . import openmax as OM
from . import supervisors as SV
from .dumpio import ActivationDump, DumpError, Origin, Split, read_dump, write_dump
from .metrics import Fnr95Mode, LabeledScore, MetricReport, ReportMetadata
from .openmax import DistanceMetric, OmegaMode, OpenMaxModel, OpenMaxParams
from .supervisors import ScoredSample, SupervisorConfig
from .synth import SyntheticSpec, SynthError, generate
from .weibull import FitError

TRAIN_NAME = "train.oodd"
TEST_NAME = "test.oodd"
OUTLIER_NAME = "outlier.oodd"
UNKNOWN_LABEL = "unknown"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _load_dump(path: str | Path) -> ActivationDump:
    try:
        return read_dump(path)
    except FileNotFoundError as exc:
        raise DataError(f"cannot read dump {path}: {exc}") from exc
    except DumpError as exc:
        raise DataError(f"{path}: {exc}") from exc


def _require_split(dump: ActivationDump, split: Split, path: str | Path) -> None:
    if dump.manifest is not None and dump.manifest.split is not split:
        raise DataError(
            f"{path}: expected split {split.value}, manifest says "
            f"{dump.manifest.split.value}"
        )


def _parse_params(args: argparse.Namespace, n_classes: int | None = None) -> OpenMaxParams:
    alpha = args.alpha
    if alpha is None:
        alpha = min(10, n_classes) if n_classes is not None else 10
    try:
        return OpenMaxParams(
            eta=args.eta,
            alpha=alpha,
            epsilon=args.epsilon,
            distance=DistanceMetric(args.distance),
            omega_mode=OmegaMode(args.omega_mode),
            unknown_accepts=args.unknown_accepts,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


@dataclass
class EvalResult:
    report: MetricReport
    curves: M.CurveSet
    scored_test: list[ScoredSample]
    scored_outliers: list[ScoredSample]


def _score_dumps(
    supervisor: str,
    test: ActivationDump,
    outliers: ActivationDump,
    config: SupervisorConfig,
    model: OpenMaxModel | None,
    threads: int,
) -> tuple[list[ScoredSample], list[ScoredSample]]:
    if supervisor == "baseline":
        return (
            SV.baseline_score_dump(test, config, threads),
            SV.baseline_score_dump(outliers, config, threads),
        )
    assert model is not None
    return (
        OM.openmax_score_dump(test, model, threads),
        OM.openmax_score_dump(outliers, model, threads),
    )


def _labeled_scores(
    test: ActivationDump,
    outliers: ActivationDump,
    scored_test: Sequence[ScoredSample],
    scored_outliers: Sequence[ScoredSample],
) -> list[LabeledScore]:
    labeled = []
    for rec, scored in zip(test.records, scored_test):
        if rec.true_label is None:
            raise DataError(f"test sample {rec.sample_id} has no label")
        labeled.append(
            LabeledScore(
                anomaly=scored.anomaly,
                is_outlier=False,
                inlier_correct=scored.predicted_class == rec.true_label,
            )
        )
    for rec, scored in zip(outliers.records, scored_outliers):
        if rec.origin is not Origin.OUTLIER:
            raise DataError(f"outlier dump sample {rec.sample_id} is not an outlier")
        labeled.append(LabeledScore(anomaly=scored.anomaly, is_outlier=True))
    return labeled


def _evaluate(
    supervisor: str,
    train: ActivationDump | None,
    test: ActivationDump,
    outliers: ActivationDump,
    params: OpenMaxParams,
    fnr95_mode: Fnr95Mode,
    threads: int,
    model: OpenMaxModel | None = None,
) -> EvalResult:
    if test.manifest is None or test.manifest.reference_accuracy is None:
        raise DataError("test dump needs a manifest with reference_accuracy")
    config = SupervisorConfig(epsilon=params.epsilon)
    if supervisor == "openmax" and model is None:
        if train is None:
            raise UsageError("openmax evaluation needs --train or --model")
        model = OM.fit_openmax(train, params)
    scored_test, scored_outliers = _score_dumps(
        supervisor, test, outliers, config, model, threads
    )
    labeled = _labeled_scores(test, outliers, scored_test, scored_outliers)
    curves = M.build_curves(labeled)
    echo = (
        {"epsilon": params.epsilon}
        if supervisor == "baseline"
        else OM.params_to_dict(model.params)
    )
    report = M.full_report(
        labeled,
        test.manifest.reference_accuracy,
        ReportMetadata(
            supervisor_id=supervisor,
            model_name=test.manifest.model_name,
            epoch=test.manifest.epoch,
            params=echo,
        ),
        fnr95_mode,
    )
    return EvalResult(report, curves, scored_test, scored_outliers)


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        spec = SyntheticSpec(
            seed=args.seed,
            n_classes=args.n_classes,
            train_per_class=args.train_per_class,
            test_per_class=args.test_per_class,
            n_outliers=args.outliers,
            mean_scale=args.mean_scale,
            inlier_spread=args.inlier_spread,
            outlier_spread=args.outlier_spread,
            near_fraction=args.near_fraction,
            near_attenuation=args.near_attenuation,
            overlap=args.overlap,
            epoch=args.epoch,
            model_name=args.model_name,
            dataset_name=args.dataset_name,
        )
    except SynthError as exc:
        raise UsageError(str(exc)) from exc
    train, test, outliers = generate(spec)
    out = _out_dir(args)
    write_dump(train, out / TRAIN_NAME)
    write_dump(test, out / TEST_NAME)
    write_dump(outliers, out / OUTLIER_NAME)
    print(
        f"wrote {len(train)} train, {len(test)} test, {len(outliers)} outlier "
        f"records to {out} (test accuracy {test.manifest.reference_accuracy:.4f})"
    )
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    if args.supervisor == "baseline":
        print("baseline has no fit step; nothing to do")
        return 0
    train = _load_dump(args.train)
    _require_split(train, Split.TRAIN_CORRECT_ONLY, args.train)
    params = _parse_params(args, train.n_classes)
    model = OM.fit_openmax(train, params)
    out = _out_dir(args)
    model_path = out / "model.json"
    OM.save_model(model, model_path)
    labels = train.labels()
    for cls in model.classes:
        count = int((labels == cls.class_index).sum())
        print(
            f"class {cls.class_index}: n={count} tail={cls.tail_size} "
            f"shape={cls.shape:.6g} scale={cls.scale:.6g}"
        )
    print(f"model written to {model_path}")
    return 0


def _write_scores_csv(
    path: Path,
    dumps: Sequence[tuple[ActivationDump, Sequence[ScoredSample]]],
    n_classes: int,
) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_id", "origin", "anomaly", "predicted_class", "verdict"])
    for dump, scored in dumps:
        for rec, s in zip(dump.records, scored):
            predicted = UNKNOWN_LABEL if s.predicted_class == n_classes else s.predicted_class
            writer.writerow(
                [rec.sample_id, rec.origin.value, repr(s.anomaly), predicted, s.verdict.value]
            )
    path.write_text(buf.getvalue(), encoding="utf-8")


def cmd_score(args: argparse.Namespace) -> int:
    if args.test is None and args.outlier is None:
        raise UsageError("score needs --test and/or --outlier")
    dumps = []
    n_classes = None
    for path in (args.test, args.outlier):
        if path is not None:
            dump = _load_dump(path)
            if n_classes is not None and dump.n_classes != n_classes:
                raise DataError("dumps disagree on n_classes")
            n_classes = dump.n_classes
            dumps.append(dump)

    model = None
    if args.supervisor == "openmax":
        if args.model is None:
            raise UsageError("openmax scoring needs --model")
        model = OM.load_model(args.model)
        model.params = replace(model.params, epsilon=args.epsilon)
        if model.n_classes != n_classes:
            raise DataError(
                f"model has {model.n_classes} classes, dumps have {n_classes}"
            )
    config = SupervisorConfig(epsilon=args.epsilon)

    scored = []
    for dump in dumps:
        if args.supervisor == "baseline":
            scored.append(SV.baseline_score_dump(dump, config, args.threads))
        else:
            scored.append(OM.openmax_score_dump(dump, model, args.threads))
    out = _out_dir(args)
    _write_scores_csv(out / "scores.csv", list(zip(dumps, scored)), n_classes)
    total = sum(len(d) for d in dumps)
    print(f"scored {total} samples with {args.supervisor} -> {out / 'scores.csv'}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    test = _load_dump(args.test)
    outliers = _load_dump(args.outlier)
    if test.n_classes != outliers.n_classes:
        raise DataError("test and outlier dumps disagree on n_classes")
    train = _load_dump(args.train) if args.train else None
    model = OM.load_model(args.model) if args.model else None
    params = _parse_params(args, test.n_classes)
    if model is not None:
        model.params = replace(model.params, epsilon=args.epsilon)
    result = _evaluate(
        args.supervisor,
        train,
        test,
        outliers,
        params,
        Fnr95Mode(args.fnr95_mode),
        args.threads,
        model,
    )
    out = _out_dir(args)
    M.write_report_csv([result.report], out / "report.csv")
    (out / "report.json").write_text(result.report.to_json(), encoding="utf-8")
    M.write_roc_csv(result.curves, out / "roc.csv")
    M.write_pr_csv(result.curves, out / "pr.csv")
    M.write_coverage_csv(result.curves, out / "coverage.csv")
    r = result.report
    print(
        f"{args.supervisor}: auroc={r.auroc:.5f} auprc={r.auprc:.5f} "
        f"tpr05={r.tpr05:.5f} fnr95={r.fnr95:.5f} p95={r.p95:.5f} "
        f"cbpl={r.cbpl:.5f} cbfad={r.cbfad:.5f}"
    )
    return 0


def _parse_list(text: str, kind, what: str) -> list:
    try:
        return [kind(tok) for tok in text.split(",") if tok]
    except ValueError as exc:
        raise UsageError(f"bad {what} list {text!r}: {exc}") from exc


_OBJECTIVES = {"auroc": "auroc", "auprc": "auprc", "cbpl": "cbpl"}


def cmd_sweep(args: argparse.Namespace) -> int:
    train = _load_dump(args.train)
    test = _load_dump(args.test)
    outliers = _load_dump(args.outlier)
    etas = _parse_list(args.eta_values, int, "eta")
    if args.alpha_values:
        alphas = _parse_list(args.alpha_values, int, "alpha")
    else:
        alphas = list(range(1, train.n_classes + 1))
    distances = [DistanceMetric(d) for d in _parse_list(args.distance_values, str, "distance")]
    omega_modes = [OmegaMode(m) for m in _parse_list(args.omega_mode_values, str, "omega-mode")]
    if not (etas and alphas and distances and omega_modes):
        raise UsageError("sweep grid must be nonempty")
    objective = _OBJECTIVES[args.objective]
    fnr95_mode = Fnr95Mode(args.fnr95_mode)

    rows = []
    for eta, alpha, distance, omega_mode in itertools.product(
        etas, alphas, distances, omega_modes
    ):
        try:
            params = OpenMaxParams(
                eta=eta,
                alpha=alpha,
                epsilon=args.epsilon,
                distance=distance,
                omega_mode=omega_mode,
                unknown_accepts=args.unknown_accepts,
            )
            result = _evaluate(
                "openmax", train, test, outliers, params, fnr95_mode, args.threads
            )
        except (ValueError, FitError, DataError) as exc:
            rows.append(
                {
                    "eta": eta,
                    "alpha": alpha,
                    "distance": distance.value,
                    "omega_mode": omega_mode.value,
                    "status": f"failed: {exc}",
                    "report": None,
                }
            )
            continue
        rows.append(
            {
                "eta": eta,
                "alpha": alpha,
                "distance": distance.value,
                "omega_mode": omega_mode.value,
                "status": "ok",
                "report": result.report,
            }
        )

    def sort_key(row):
        score = getattr(row["report"], objective) if row["report"] else -1.0
        return (-score, row["eta"], row["alpha"], row["distance"], row["omega_mode"])

    rows.sort(key=sort_key)
    out = _out_dir(args)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["eta", "alpha", "distance", "omega_mode", "status"]
        + ["auroc", "auprc", "tpr05", "fnr95", "p95", "cbpl", "cbfad"]
    )
    for row in rows:
        r = row["report"]
        values = (
            [""] * 7
            if r is None
            else [repr(v) for v in (r.auroc, r.auprc, r.tpr05, r.fnr95, r.p95, r.cbpl, r.cbfad)]
        )
        writer.writerow(
            [row["eta"], row["alpha"], row["distance"], row["omega_mode"], row["status"]]
            + values
        )
    (out / "sweep.csv").write_text(buf.getvalue(), encoding="utf-8")

    winner = rows[0]
    if winner["report"] is None:
        raise DataError("every grid point failed to fit")
    print(
        f"winner: eta={winner['eta']} alpha={winner['alpha']} "
        f"distance={winner['distance']} omega_mode={winner['omega_mode']} "
        f"{args.objective}={getattr(winner['report'], objective):.5f}"
    )
    return 0


def _series_run_dirs(args: argparse.Namespace) -> list[Path]:
    dirs = [Path(p) for p in (args.run or [])]
    if args.runs_root:
        root = Path(args.runs_root)
        if not root.is_dir():
            raise DataError(f"runs root {root} is not a directory")
        for child in sorted(root.iterdir()):
            if (child / TEST_NAME).exists():
                dirs.append(child)
    if not dirs:
        raise UsageError("series needs --run DIR (repeatable) or --runs-root DIR")
    return dirs


def cmd_series(args: argparse.Namespace) -> int:
    fnr95_mode = Fnr95Mode(args.fnr95_mode)
    reports: list[MetricReport] = []
    n_classes = None
    for run_dir in _series_run_dirs(args):
        train = _load_dump(run_dir / TRAIN_NAME) if args.supervisor == "openmax" else None
        test = _load_dump(run_dir / TEST_NAME)
        outliers = _load_dump(run_dir / OUTLIER_NAME)
        if n_classes is not None and test.n_classes != n_classes:
            raise DataError("series dumps disagree on n_classes")
        n_classes = test.n_classes
        params = _parse_params(args, test.n_classes)
        result = _evaluate(
            args.supervisor, train, test, outliers, params, fnr95_mode, args.threads
        )
        reports.append(result.report)

    epochs = [r.metadata.epoch for r in reports]
    if len(set(epochs)) != len(epochs):
        raise DataError(f"duplicate epochs in series: {sorted(epochs)}")
    reports.sort(key=lambda r: r.metadata.epoch)

    out = _out_dir(args)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["epoch", "acc", "auroc", "auprc", "tpr05", "fnr95", "p95", "cbpl", "cbfad"]
    )
    for r in reports:
        writer.writerow(
            [r.metadata.epoch]
            + [
                repr(v)
                for v in (
                    r.reference_accuracy,
                    r.auroc,
                    r.auprc,
                    r.tpr05,
                    r.fnr95,
                    r.p95,
                    r.cbpl,
                    r.cbfad,
                )
            ]
        )
    (out / "series.csv").write_text(buf.getvalue(), encoding="utf-8")
    for r in reports:
        print(
            f"epoch {r.metadata.epoch}: acc={r.reference_accuracy:.4f} "
            f"auroc={r.auroc:.5f} cbpl={r.cbpl:.5f}"
        )
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _add_openmax_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eta", type=int, default=20, help="Weibull tail size")
    p.add_argument("--alpha", type=int, default=None, help="classes to revise (default min(10, N))")
    p.add_argument(
        "--distance",
        choices=[m.value for m in DistanceMetric],
        default=DistanceMetric.EUCLIDEAN.value,
    )
    p.add_argument(
        "--omega-mode",
        choices=[m.value for m in OmegaMode],
        default=OmegaMode.RANK_WEIGHTED.value,
    )
    p.add_argument(
        "--unknown-accepts",
        action="store_true",
        help="accept (rather than reject) samples whose augmented argmax is the unknown class",
    )


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=0.5, help="accept threshold")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodkit",
        description="Out-of-distribution supervisors and evaluation over activation dumps",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate seeded synthetic dumps")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n-classes", type=int, default=10)
    p.add_argument("--train-per-class", type=int, default=150)
    p.add_argument("--test-per-class", type=int, default=60)
    p.add_argument("--outliers", type=int, default=600)
    p.add_argument("--mean-scale", type=float, default=2.5)
    p.add_argument("--inlier-spread", type=float, default=1.0)
    p.add_argument("--outlier-spread", type=float, default=1.0)
    p.add_argument("--near-fraction", type=float, default=0.10)
    p.add_argument("--near-attenuation", type=float, default=0.65)
    p.add_argument("--overlap", type=float, default=1.0)
    p.add_argument("--epoch", type=int, default=0)
    p.add_argument("--model-name", default="synthetic")
    p.add_argument("--dataset-name", default="synthetic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit the OpenMax Weibull model")
    p.add_argument("--train", required=True)
    p.add_argument("--supervisor", choices=["baseline", "openmax"], default="openmax")
    _add_openmax_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="score dumps and write per-sample verdicts")
    p.add_argument("--test")
    p.add_argument("--outlier")
    p.add_argument("--supervisor", choices=["baseline", "openmax"], default="baseline")
    p.add_argument("--model", help="fitted model JSON (openmax)")
    _add_common_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="compute the full metric report and curves")
    p.add_argument("--train")
    p.add_argument("--test", required=True)
    p.add_argument("--outlier", required=True)
    p.add_argument("--supervisor", choices=["baseline", "openmax"], default="baseline")
    p.add_argument("--model")
    p.add_argument("--fnr95-mode", choices=[m.value for m in Fnr95Mode], default=Fnr95Mode.TNR95.value)
    _add_openmax_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid-search OpenMax hyperparameters")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--outlier", required=True)
    p.add_argument("--eta", dest="eta_values", default="10,20,50,100")
    p.add_argument("--alpha", dest="alpha_values", default="", help="default 1..N")
    p.add_argument(
        "--distance", dest="distance_values", default="euclidean,cosine,eucos"
    )
    p.add_argument(
        "--omega-mode", dest="omega_mode_values", default="rank-weighted,plain-cdf"
    )
    p.add_argument("--objective", choices=sorted(_OBJECTIVES), default="auroc")
    p.add_argument("--fnr95-mode", choices=[m.value for m in Fnr95Mode], default=Fnr95Mode.TNR95.value)
    p.add_argument("--unknown-accepts", action="store_true")
    _add_common_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("series", help="evaluate a family of per-epoch dumps")
    p.add_argument("--run", action="append", help="directory with train/test/outlier dumps (repeatable)")
    p.add_argument("--runs-root", help="directory whose children are per-epoch run dirs")
    p.add_argument("--supervisor", choices=["baseline", "openmax"], default="baseline")
    p.add_argument("--fnr95-mode", choices=[m.value for m in Fnr95Mode], default=Fnr95Mode.TNR95.value)
    _add_openmax_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_series)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (DataError, DumpError, SynthError, M.MetricsError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
