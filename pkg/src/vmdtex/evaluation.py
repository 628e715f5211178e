"""Confusion metrics, patient recognition rate and the experiment runner."""
from __future__ import annotations

import csv
import io
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .artifacts import FeatureTable
from .classifier import LsSvmModel, grid_search, train_lssvm
from .config import PipelineConfig
from .dataset import BENIGN, MALIGNANT, MAGNIFICATIONS, Manifest, patient_folds, patient_split
from .errors import DataError, EmptyEvaluation, LengthMismatch, UnknownPatient, VmdTexError
from .selection import FeatureMatrix, relieff, significance_filter, zscore_apply, zscore_fit

log = logging.getLogger(__name__)

METRIC_NAMES = ("Acc", "Sen", "Spec", "PPV", "NPV")
TABLE_HEADER = (
    "Zoom factor",
    "Accuracy (%)",
    "Sensitivity (%)",
    "Specificity (%)",
    "PPV (%)",
    "NPV (%)",
    "PRR (%)",
)
UNDEFINED = "undefined"


def _is_malignant(label) -> bool:
    if label in (MALIGNANT, 1, 1.0, True):
        return True
    if label in (BENIGN, -1, -1.0, 0, False):
        return False
    raise ValueError(f"unrecognised class label {label!r}")


@dataclass(frozen=True)
class ConfusionCounts:
    TP: int = 0
    FP: int = 0
    TN: int = 0
    FN: int = 0

    @property
    def total(self) -> int:
        return self.TP + self.FP + self.TN + self.FN

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.TP + other.TP, self.FP + other.FP, self.TN + other.TN, self.FN + other.FN)

    def as_dict(self) -> dict[str, int]:
        return {"TP": self.TP, "FP": self.FP, "TN": self.TN, "FN": self.FN}


def confusion(predictions: Sequence, labels: Sequence) -> ConfusionCounts:
    """Count outcomes with malignant as the positive class.

    Labels may be ``"benign"``/``"malignant"`` or -1/+1.
    """
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(labels)} labels")
    tp = fp = tn = fn = 0
    for pred, truth in zip(predictions, labels):
        p, t = _is_malignant(pred), _is_malignant(truth)
        if p and t:
            tp += 1
        elif p:
            fp += 1
        elif t:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def image_metrics(counts: ConfusionCounts) -> dict[str, float | None]:
    """Acc, Sen, Spec, PPV and NPV; a zero denominator yields ``None`` (undefined)."""
    if counts.total == 0:
        raise EmptyEvaluation("no evaluated samples")
    c = counts
    return {
        "Acc": (c.TP + c.TN) / c.total,
        "Sen": _ratio(c.TP, c.TP + c.FN),
        "Spec": _ratio(c.TN, c.TN + c.FP),
        "PPV": _ratio(c.TP, c.TP + c.FP),
        "NPV": _ratio(c.TN, c.TN + c.FN),
    }


@dataclass(frozen=True)
class PatientScore:
    patient_id: str
    n_images: int
    n_correct: int

    @property
    def score(self) -> float:
        return self.n_correct / self.n_images


def patient_recognition_rate(
    results: Iterable[tuple[str, bool]],
    known_patients: Iterable[str] | None = None,
) -> tuple[float, list[PatientScore]]:
    """Mean over patients of the fraction of that patient's images classified correctly.

    ``results`` yields ``(patient_id, correct)`` pairs.
    """
    known = set(known_patients) if known_patients is not None else None
    tally: dict[str, list[int]] = {}
    for pid, correct in results:
        if known is not None and pid not in known:
            raise UnknownPatient(pid)
        t = tally.setdefault(pid, [0, 0])
        t[0] += 1
        t[1] += int(bool(correct))
    if not tally:
        raise EmptyEvaluation("no per-image results")
    scores = [PatientScore(pid, n, k) for pid, (n, k) in sorted(tally.items())]
    return float(np.mean([s.score for s in scores])), scores


# -- experiment ------------------------------------------------------------

def _signed(labels: Sequence[str]) -> np.ndarray:
    return np.array([1.0 if _is_malignant(lbl) else -1.0 for lbl in labels])


def neighbour_count(labels, k_neighbors: int) -> int:
    """ReliefF ``k`` clipped so every class can supply ``k`` neighbours."""
    counts = np.unique(labels, return_counts=True)[1]
    if counts.size < 2:
        raise DataError("training rows contain a single class")
    return max(1, min(k_neighbors, int(counts.min()) - 1))


def fit_fold(train: FeatureMatrix, config: PipelineConfig, seed: int) -> tuple[LsSvmModel, dict]:
    """Selection, normalisation, grid search and final training on training rows only."""
    k = neighbour_count(train.labels, config.selection.k_neighbors)
    ranked = relieff(train, k_neighbors=k, seed=seed)
    ranked = significance_filter(
        train, ranked, config.selection.p_threshold, config.selection.fallback_top
    )
    selected = ranked.selected
    Xtr = train.subset(columns=ranked.selected_mask).values
    stats = zscore_fit(Xtr)
    Xtr = zscore_apply(stats, Xtr)
    ytr = _signed(train.labels)
    gamma, sigma, table = grid_search(
        Xtr,
        ytr,
        config.classifier.gamma_grid,
        config.classifier.sigma_grid,
        config.classifier.inner_folds,
        seed,
    )
    model = train_lssvm(Xtr, ytr, gamma, sigma)
    model.feature_mask = selected
    model.norm_stats = stats
    info = {
        "k_neighbors": k,
        "n_selected": len(selected),
        "selection_fallback": bool(ranked.fallback),
        "gamma": gamma,
        "sigma": sigma,
        "kkt_residual": model.kkt_residual,
        "grid": [
            {"gamma": c.gamma, "sigma": c.sigma, "accuracy": c.accuracy, "failed": c.failed}
            for c in table
        ],
    }
    return model, info


def _metrics_json(metrics: dict) -> dict:
    return {k: (UNDEFINED if v is None else v) for k, v in metrics.items()}


def _mean_std(values: list) -> dict:
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": UNDEFINED, "std": UNDEFINED, "n": 0}
    return {"mean": float(np.mean(vals)), "std": float(np.std(vals)), "n": len(vals)}


def _splits(sub: Manifest, config: PipelineConfig) -> list[tuple[frozenset, frozenset]]:
    exp = config.experiment
    if exp.mode == "kfold":
        folds = patient_folds(sub, exp.k, config.seed)
        everyone = frozenset(sub.patient_ids)
        return [(everyone - f, f) for f in folds]
    plans = [patient_split(sub, exp.train_fraction, config.seed + r) for r in range(exp.repeats)]
    return [(p.train_patients, p.test_patients) for p in plans]


def _row_groups(manifest: Manifest, magnification) -> list[tuple[str, int | None]]:
    present = sorted({s.magnification for s in manifest.samples})
    if magnification == "all":
        return [(f"{m}X", m) for m in MAGNIFICATIONS if m in present] + [("Full Dataset", None)]
    if magnification == "full":
        return [("Full Dataset", None)]
    return [(f"{magnification}X", int(magnification))]


def _evaluate_group(name, mag, manifest, features, index, config) -> dict:
    sub = manifest.filter(magnification=mag)
    if not sub.samples:
        raise DataError(f"no samples for group {name}")
    rows = np.array([index[s.sample_id] for s in sub.samples], dtype=np.int64)
    pids = [features.patient_ids[i] for i in rows]
    labels = [features.labels[i] for i in rows]

    folds = []
    pooled = ConfusionCounts()
    pooled_results: list[tuple[str, bool]] = []
    for fold_no, (train_p, test_p) in enumerate(_splits(sub, config)):
        tr = rows[[p in train_p for p in pids]]
        te_mask = [p in test_p for p in pids]
        te = rows[te_mask]
        train = FeatureMatrix(features.values[tr], features.names, [features.labels[i] for i in tr])
        try:
            model, info = fit_fold(train, config, config.seed + fold_no)
        except VmdTexError as exc:
            raise type(exc)(f"{name} fold {fold_no}: {exc}") from exc
        Xte = model.prepare(features.values[te], features.names)
        preds = model.predict(Xte)
        truth = _signed([features.labels[i] for i in te])
        counts = confusion(list(preds), list(truth))
        results = [(features.patient_ids[i], bool(p == t)) for i, p, t in zip(te, preds, truth)]
        prr, scores = patient_recognition_rate(results, known_patients=test_p)
        pooled = pooled + counts
        pooled_results += results
        folds.append(
            {
                "fold": fold_no,
                "train_patients": sorted(train_p),
                "test_patients": sorted(test_p),
                "n_train": int(tr.size),
                "n_test": int(te.size),
                "counts": counts.as_dict(),
                "metrics": _metrics_json(image_metrics(counts)),
                "prr": prr,
                "patient_scores": {s.patient_id: [s.n_correct, s.n_images] for s in scores},
                **info,
            }
        )

    pooled_prr, _ = patient_recognition_rate(pooled_results)
    per_fold = {
        m: _mean_std([f["metrics"][m] if f["metrics"][m] != UNDEFINED else None for f in folds])
        for m in METRIC_NAMES
    }
    per_fold["PRR"] = _mean_std([f["prr"] for f in folds])
    return {
        "name": name,
        "magnification": mag if mag is not None else "full",
        "n_images": int(rows.size),
        "n_patients": len(sub.patients),
        "pooled": {
            "counts": pooled.as_dict(),
            "metrics": _metrics_json(image_metrics(pooled)),
            "prr": pooled_prr,
        },
        "fold_summary": per_fold,
        "folds": folds,
    }


def run_experiment(manifest: Manifest, config: PipelineConfig, features: FeatureTable | None = None) -> dict:
    """Run the configured protocol and return a JSON-ready report.

    ``kfold`` uses patient-wise folds; ``holdout`` repeats a seeded patient
    split ``repeats`` times.  Magnification ``"all"`` produces one row per
    magnification present plus a full-dataset row.
    """
    if features is None:
        from .pipeline import compute_features

        features = compute_features(manifest, config)
    index = {sid: i for i, sid in enumerate(features.sample_ids)}
    missing = [s.sample_id for s in manifest.samples if s.sample_id not in index]
    if missing:
        raise DataError(f"{len(missing)} manifest samples have no features (e.g. {missing[0]})")
    rows = [
        _evaluate_group(name, mag, manifest, features, index, config)
        for name, mag in _row_groups(manifest, config.dataset.magnification)
    ]
    return {
        "schema": "vmdtex-report/1",
        "seed": config.seed,
        "protocol": {
            "mode": config.experiment.mode,
            "k": config.experiment.k if config.experiment.mode == "kfold" else None,
            "repeats": config.experiment.repeats if config.experiment.mode == "holdout" else None,
            "train_fraction": config.experiment.train_fraction if config.experiment.mode == "holdout" else None,
        },
        "config": config.to_dict(),
        "rows": rows,
    }


def summary_table(report: dict) -> str:
    """CSV table with one line per row group, columns in the published order (percent)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_HEADER)

    def pct(v):
        return UNDEFINED if v == UNDEFINED or v is None else f"{100.0 * v:.2f}"

    for row in report["rows"]:
        m = row["pooled"]["metrics"]
        writer.writerow([row["name"], *(pct(m[k]) for k in METRIC_NAMES), pct(row["pooled"]["prr"])])
    return buf.getvalue()


def report_rows(report: dict) -> OrderedDict:
    return OrderedDict((row["name"], row) for row in report["rows"])
