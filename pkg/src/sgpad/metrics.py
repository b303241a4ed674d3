"""Biometric evaluation metric suite for two-class spoof detection.

Score orientation is fixed throughout: spoof is the positive class and
higher scores mean more spoof-like. The test-time decision rule is
``score > threshold -> spoof``, with the threshold taken from validation
data at the equal-error operating point.

Metrics: rank-based AUC, EER threshold, thresholded accuracies (overall,
per-class, per-attack-type), the d' separability index, FNR at a fixed
FPR budget, normalized gain over a baseline, and hypothetical competition
placement against a published accuracy list.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .data import Label

SCORE_HEADER = ["sample_id", "score", "label", "attack_type"]


@dataclass(frozen=True)
class ScoredEntry:
    sample_id: str
    score: float
    label: Label
    attack_type: str | None = None


@dataclass(frozen=True)
class ScoredSet:
    """Model predictions on one evaluation set."""

    entries: tuple[ScoredEntry, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise ValueError("scored set must be non-empty")
        object.__setattr__(self, "entries", entries)

    @property
    def bona_scores(self) -> np.ndarray:
        return np.array([e.score for e in self.entries if e.label is Label.BONAFIDE])

    @property
    def spoof_scores(self) -> np.ndarray:
        return np.array([e.score for e in self.entries if e.label is Label.SPOOF])

    def require_both_labels(self, op: str) -> None:
        if self.bona_scores.size == 0 or self.spoof_scores.size == 0:
            raise ValueError(f"{op} requires scores from both classes")


@dataclass(frozen=True)
class EvalReport:
    """Full metric set for one model on one test set."""

    auc: float
    eer_threshold: float
    accuracy: float
    bonafide_accuracy: float
    spoof_accuracy: float
    per_attack_accuracy: dict[str, float]
    d_prime: float
    fnr_at_fpr01: float
    placement: tuple[int, int] | None = None
    score_orientation: str = "higher_is_spoof"

    def __post_init__(self):
        rates = [self.auc, self.accuracy, self.bonafide_accuracy, self.spoof_accuracy,
                 self.fnr_at_fpr01, *self.per_attack_accuracy.values()]
        if any(not (0.0 <= r <= 1.0) for r in rates):
            raise ValueError("all rates must lie in [0, 1]")
        if self.d_prime < 0:
            raise ValueError("d_prime must be non-negative")

    def to_json_dict(self) -> dict:
        return {
            "auc": self.auc,
            "eer_threshold": self.eer_threshold,
            "accuracy": self.accuracy,
            "bonafide_accuracy": self.bonafide_accuracy,
            "spoof_accuracy": self.spoof_accuracy,
            "per_attack_accuracy": dict(self.per_attack_accuracy),
            "d_prime": self.d_prime,
            "fnr_at_fpr01": self.fnr_at_fpr01,
            "placement": list(self.placement) if self.placement else None,
            "score_orientation": self.score_orientation,
        }


@dataclass(frozen=True)
class GainReport:
    """Improvement relative to remaining headroom over a baseline."""

    metric_name: str
    m_baseline: float
    m_guided: float
    normalized_gain: float = field(init=False)

    def __post_init__(self):
        if not (0.0 <= self.m_baseline < 1.0):
            raise ValueError(
                f"baseline metric must lie in [0, 1), got {self.m_baseline}"
                + (" (gain undefined at a perfect baseline)" if self.m_baseline == 1.0 else "")
            )
        if not (0.0 <= self.m_guided <= 1.0):
            raise ValueError(f"guided metric must lie in [0, 1], got {self.m_guided}")
        gain = (self.m_guided - self.m_baseline) / (1.0 - self.m_baseline)
        object.__setattr__(self, "normalized_gain", gain)


def roc_auc(s: ScoredSet) -> float:
    """Rank-based (Mann-Whitney) AUC with ties counted one half.

    Equals the probability that a uniformly random spoof outscores a
    uniformly random bonafide sample, exactly matching the all-pairs
    count.
    """
    s.require_both_labels("roc_auc")
    scores = np.array([e.score for e in s.entries], dtype=np.float64)
    is_spoof = np.array([e.label is Label.SPOOF for e in s.entries])
    ranks = rankdata(scores, method="average")
    n_s = int(is_spoof.sum())
    n_b = is_spoof.size - n_s
    rank_sum = ranks[is_spoof].sum()
    return (rank_sum - n_s * (n_s + 1) / 2.0) / (n_s * n_b)


def _threshold_candidates(scores: np.ndarray) -> np.ndarray:
    distinct = np.unique(scores)
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    return np.concatenate(([-np.inf], mids, [np.inf]))


def _rates(thresholds: np.ndarray, bona: np.ndarray, spoof: np.ndarray):
    """FPR and FNR per threshold for the rule score > t -> spoof."""
    bona_sorted = np.sort(bona)
    spoof_sorted = np.sort(spoof)
    fpr = 1.0 - np.searchsorted(bona_sorted, thresholds, side="right") / bona.size
    fnr = np.searchsorted(spoof_sorted, thresholds, side="right") / spoof.size
    return fpr, fnr


def eer_threshold(validation: ScoredSet) -> float:
    """Threshold minimizing |FPR - FNR| over score midpoints.

    Candidates are the midpoints between adjacent distinct scores plus
    infinite sentinels; ties break toward the smaller threshold.
    """
    validation.require_both_labels("eer_threshold")
    bona, spoof = validation.bona_scores, validation.spoof_scores
    candidates = _threshold_candidates(np.concatenate((bona, spoof)))
    fpr, fnr = _rates(candidates, bona, spoof)
    return float(candidates[np.argmin(np.abs(fpr - fnr))])


def thresholded_accuracies(
    test: ScoredSet, t: float
) -> tuple[float, float, float, dict[str, float]]:
    """(overall, bonafide, spoof, per-attack) accuracy at threshold ``t``.

    Bonafide samples are correct at score <= t, spoof at score > t.
    Attack types absent from the set are omitted rather than reported 0.
    """
    if math.isnan(t):
        raise ValueError("threshold must not be NaN")
    correct = [
        (e.score > t) if e.label is Label.SPOOF else (e.score <= t) for e in test.entries
    ]
    overall = sum(correct) / len(correct)
    bona = [c for c, e in zip(correct, test.entries) if e.label is Label.BONAFIDE]
    spoof = [c for c, e in zip(correct, test.entries) if e.label is Label.SPOOF]
    bona_acc = sum(bona) / len(bona) if bona else 1.0
    spoof_acc = sum(spoof) / len(spoof) if spoof else 1.0
    per_attack: dict[str, float] = {}
    attacks = sorted({e.attack_type for e in test.entries if e.attack_type is not None})
    for attack in attacks:
        hits = [c for c, e in zip(correct, test.entries) if e.attack_type == attack]
        per_attack[attack] = sum(hits) / len(hits)
    return overall, bona_acc, spoof_acc, per_attack


def d_prime(s: ScoredSet) -> float:
    """Two-class sensitivity index over raw scores:
    |mu_spoof - mu_bona| / sqrt((var_spoof + var_bona) / 2), population
    variances."""
    bona, spoof = s.bona_scores, s.spoof_scores
    if bona.size < 2 or spoof.size < 2:
        raise ValueError("d_prime requires at least 2 samples per class")
    mean_gap = abs(spoof.mean() - bona.mean())
    pooled = (spoof.var(ddof=0) + bona.var(ddof=0)) / 2.0
    if pooled == 0.0:
        if mean_gap == 0.0:
            return 0.0
        raise ValueError(
            "d_prime undefined: both classes are constant with unequal means (zero variance)"
        )
    return float(mean_gap / math.sqrt(pooled))


def fnr_at_fpr(s: ScoredSet, target_fpr: float = 0.01) -> float:
    """FNR at the smallest threshold whose FPR does not exceed the target.

    The threshold is an achievable operating point (no interpolation):
    with m = floor(target * n_bona) allowed false positives, it is the
    (m+1)-th largest bonafide score.
    """
    s.require_both_labels("fnr_at_fpr")
    if target_fpr < 0:
        raise ValueError("target_fpr must be >= 0")
    bona = np.sort(s.bona_scores)
    spoof = s.spoof_scores
    m = int(math.floor(target_fpr * bona.size))
    if m >= bona.size:
        return 0.0  # even the -inf threshold satisfies the budget
    t = bona[bona.size - 1 - m]
    return float(np.mean(spoof <= t))


def normalized_gain(m_guided: float, m_baseline: float, metric_name: str = "auc") -> GainReport:
    """Improvement relative to remaining headroom:
    (guided - baseline) / (1 - baseline)."""
    return GainReport(metric_name=metric_name, m_baseline=m_baseline, m_guided=m_guided)


def placement(
    accuracy_mean: float, accuracy_std: float, competitors: list[float]
) -> tuple[int, int]:
    """Hypothetical rank range (best..worst) among published competitor
    accuracies, evaluated at mean +/- std. Rank is 1 plus the number of
    strictly greater competitor scores."""
    if not competitors:
        raise ValueError("competitor list must be non-empty")
    if any(competitors[i] < competitors[i + 1] for i in range(len(competitors) - 1)):
        raise ValueError("competitor accuracies must be sorted descending")
    if accuracy_std < 0:
        raise ValueError("accuracy_std must be >= 0")
    arr = np.asarray(competitors, dtype=np.float64)
    lo = 1 + int((arr > accuracy_mean + accuracy_std).sum())
    hi = 1 + int((arr > accuracy_mean - accuracy_std).sum())
    return lo, hi


def det_points(s: ScoredSet) -> list[tuple[float, float, float]]:
    """(threshold, FPR, FNR) triples at every candidate threshold, for
    external DET-curve plotting."""
    s.require_both_labels("det_points")
    bona, spoof = s.bona_scores, s.spoof_scores
    candidates = _threshold_candidates(np.concatenate((bona, spoof)))
    fpr, fnr = _rates(candidates, bona, spoof)
    return [(float(t), float(p), float(n)) for t, p, n in zip(candidates, fpr, fnr)]


def evaluate(
    test: ScoredSet,
    validation_threshold: float,
    competitors: list[float] | None = None,
) -> EvalReport:
    """Assemble the full report for one model: AUC, accuracies at the
    validation threshold, d', FNR @ FPR = 1%, and optional placement."""
    overall, bona_acc, spoof_acc, per_attack = thresholded_accuracies(
        test, validation_threshold
    )
    rank_range = placement(overall, 0.0, competitors) if competitors else None
    return EvalReport(
        auc=roc_auc(test),
        eer_threshold=validation_threshold,
        accuracy=overall,
        bonafide_accuracy=bona_acc,
        spoof_accuracy=spoof_acc,
        per_attack_accuracy=per_attack,
        d_prime=d_prime(test),
        fnr_at_fpr01=fnr_at_fpr(test, 0.01),
        placement=rank_range,
    )


def write_scores(s: ScoredSet, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCORE_HEADER)
        for e in s.entries:
            writer.writerow([e.sample_id, repr(e.score), e.label.value, e.attack_type or ""])


def read_scores(path: str | Path) -> ScoredSet:
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SCORE_HEADER:
            raise ValueError(f"{path}: unexpected score header {header}")
        for sid, score, label, attack in reader:
            entries.append(ScoredEntry(sid, float(score), Label(label), attack or None))
    return ScoredSet(tuple(entries))


def write_report(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=2)


def read_report(path: str | Path) -> EvalReport:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return EvalReport(
        auc=doc["auc"],
        eer_threshold=doc["eer_threshold"],
        accuracy=doc["accuracy"],
        bonafide_accuracy=doc["bonafide_accuracy"],
        spoof_accuracy=doc["spoof_accuracy"],
        per_attack_accuracy=doc["per_attack_accuracy"],
        d_prime=doc["d_prime"],
        fnr_at_fpr01=doc["fnr_at_fpr01"],
        placement=tuple(doc["placement"]) if doc.get("placement") else None,
        score_orientation=doc.get("score_orientation", "higher_is_spoof"),
    )
