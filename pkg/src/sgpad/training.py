"""Training scenario orchestration.

Five scenario families share one runner: large- and limited-data
cross-entropy baselines (S1, S2), loss-based saliency guidance via the
blended alignment loss (S3, S5), and blur-based guidance where the
training set is expanded with non-salient regions blurred (S4). A
scenario is described by a JSON-serializable config, executed as
``runs`` independent seeded trainings, and reported as per-run score
files plus a mean and sample standard deviation aggregate.

The trainable unit is :class:`CyborgPadClassifier`, an sklearn-style
estimator wrapping a backbone from :mod:`sgpad.backbones`. Training is
single-threaded and deterministic under its seed; identical configs
reproduce identical score files on the same platform.
"""
from __future__ import annotations

import copy
import csv
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.base import BaseEstimator, ClassifierMixin

from .backbones import BACKBONE_NAMES, build_backbone
from .blur import BlurConfig, blur_nonsalient, gaussian_blur
from .data import (
    Label,
    Manifest,
    SampleRecord,
    Split,
    load_image,
    preprocess,
    save_image,
    split_validation,
)
from .losses import alignment_term
from .metrics import (
    EvalReport,
    ScoredEntry,
    ScoredSet,
    eer_threshold,
    evaluate,
    placement,
    write_scores,
)
from .saliency import Granularity, SaliencyMap, SaliencySource, at_granularity, load_saliency
from .validation import check_image_batch, check_labels, check_saliency_batch

logger = logging.getLogger(__name__)

SCENARIOS = ("S1", "S2", "S3", "S4", "S5")
GUIDANCE_MODES = ("none", "cyborg", "blur")
DEFAULT_ALPHA_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)


class TrainingDiverged(RuntimeError):
    """Raised when a training step produces a non-finite loss."""


class CyborgPadClassifier(BaseEstimator, ClassifierMixin):
    """Two-class spoof detector trained with optional CAM-alignment guidance.

    With ``guidance="none"`` this is plain cross-entropy training. With
    ``guidance="cyborg"`` the loss blends cross-entropy (weight ``alpha``)
    with the CAM-saliency alignment term (weight ``1 - alpha``); samples
    without a saliency map contribute only the classification term, and
    the batch alignment mean is taken over covered samples only.

    When validation data is supplied to :meth:`fit`, the epoch checkpoint
    with the lowest validation total loss is kept (epoch 0, the untrained
    model, is logged and eligible). Training is single-threaded and
    deterministic under ``seed``.
    """

    def __init__(
        self,
        backbone: str = "toy",
        guidance: str = "none",
        alpha: float | None = None,
        learning_rate: float = 1e-4,
        batch_size: int = 32,
        epochs: int = 10,
        seed: int = 0,
        pretrained: bool | None = None,
    ):
        self.backbone = backbone
        self.guidance = guidance
        self.alpha = alpha
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.pretrained = pretrained

    def _validate_params(self):
        if self.backbone not in BACKBONE_NAMES:
            raise ValueError(f"unknown backbone {self.backbone!r}")
        if self.guidance not in ("none", "cyborg"):
            raise ValueError(
                f"estimator guidance must be 'none' or 'cyborg', got {self.guidance!r} "
                "(blur guidance expands the dataset upstream and trains with 'none')"
            )
        if self.guidance == "cyborg":
            if self.alpha is None:
                raise ValueError("cyborg guidance requires alpha")
            if not (0.0 <= self.alpha <= 1.0):
                raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")

    def fit(self, X, y, saliency=None, X_val=None, y_val=None, saliency_val=None,
            log_path=None):
        self._validate_params()
        X = check_image_batch(X)
        n = X.shape[0]
        y = check_labels(y, n)
        dims = X.shape[1:]
        sal = check_saliency_batch(saliency, n, dims)
        if self.guidance == "cyborg" and all(m is None for m in sal):
            raise ValueError("cyborg guidance requires saliency maps for the training set")
        has_val = X_val is not None
        if has_val:
            X_val = check_image_batch(X_val)
            y_val = check_labels(y_val, X_val.shape[0])
            sal_val = check_saliency_batch(saliency_val, X_val.shape[0], X_val.shape[1:])

        prev_threads = torch.get_num_threads()
        torch.set_num_threads(1)
        try:
            torch.manual_seed(self.seed)
            rng = np.random.default_rng(self.seed)
            model = build_backbone(self.backbone, self.pretrained)
            images = torch.from_numpy(np.ascontiguousarray(X, dtype=np.float32))[:, None]
            labels = torch.from_numpy(y)
            sal_t = [None if m is None else torch.from_numpy(m.values.astype(np.float32))
                     for m in sal]
            if has_val:
                images_val = torch.from_numpy(np.ascontiguousarray(X_val, dtype=np.float32))[:, None]
                labels_val = torch.from_numpy(y_val)
                sal_val_t = [None if m is None else torch.from_numpy(m.values.astype(np.float32))
                             for m in sal_val]
            opt = torch.optim.Adam(model.parameters(), lr=self.learning_rate)

            history: list[dict] = []
            best = {"epoch": None, "val_total": None, "state": None}
            log_rows: list[list] = []

            def consider(epoch: int):
                if not has_val:
                    return
                model.eval()
                with torch.no_grad():
                    val_total, val_cls, val_align = self._eval_terms(
                        model, images_val, labels_val, sal_val_t
                    )
                entry = {"epoch": epoch, "val_total": val_total, "val_cls": val_cls,
                         "val_align": val_align}
                history.append(entry)
                if best["val_total"] is None or val_total < best["val_total"]:
                    best.update(epoch=epoch, val_total=val_total,
                                state=copy.deepcopy(model.state_dict()))

            consider(0)
            global_step = 0
            for epoch in range(1, self.epochs + 1):
                model.train()
                order = rng.permutation(n)
                train_totals, train_cls, train_align = [], [], []
                for start in range(0, n, self.batch_size):
                    idxs = order[start : start + self.batch_size]
                    total, cls_v, align_v, _ = self._batch_terms(
                        model, images, labels, sal_t, idxs
                    )
                    if not torch.isfinite(total):
                        raise TrainingDiverged(
                            f"non-finite loss at epoch {epoch}, step {global_step}"
                        )
                    opt.zero_grad()
                    total.backward()
                    opt.step()
                    train_totals.append(float(total.detach()))
                    train_cls.append(cls_v)
                    train_align.append(align_v)
                    log_rows.append([
                        epoch, global_step, float(total.detach()), cls_v,
                        "" if align_v is None else align_v,
                        self.alpha if self.guidance == "cyborg" else 1.0,
                    ])
                    global_step += 1
                consider(epoch)
                if not has_val:
                    history.append({"epoch": epoch})
                history[-1].update(
                    train_total=float(np.mean(train_totals)),
                    train_cls=float(np.mean(train_cls)),
                    train_align=(
                        None
                        if all(a is None for a in train_align)
                        else float(np.mean([a for a in train_align if a is not None]))
                    ),
                )

            if has_val:
                model.load_state_dict(best["state"])
                self.best_epoch_ = best["epoch"]
                self.best_val_total_ = best["val_total"]
            else:
                self.best_epoch_ = self.epochs
                self.best_val_total_ = None
            self.history_ = history
            self.model_ = model
            self.classes_ = np.array([0, 1])
            model.eval()
        finally:
            torch.set_num_threads(prev_threads)

        if log_path is not None:
            with open(log_path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["epoch", "step", "total", "cls", "align", "alpha"])
                writer.writerows(log_rows)
        return self

    def _batch_terms(self, model, images, labels, sal_t, idxs):
        """Blended loss over one batch: mean cross-entropy over all samples,
        mean alignment over saliency-covered samples. Returns
        (total tensor, cls value, align value or None, covered count)."""
        idxs = torch.as_tensor(np.asarray(idxs, dtype=np.int64))
        logits, features = model(images[idxs])
        cls = F.cross_entropy(logits, labels[idxs])
        if self.guidance != "cyborg":
            return cls, float(cls.detach()), None, 0
        weights = model.class_weights
        align_parts = []
        for j, i in enumerate(idxs.tolist()):
            if sal_t[i] is None:
                continue
            cam = torch.einsum("c,chw->hw", weights[int(labels[i])], features[j])
            align_parts.append(alignment_term(cam, sal_t[i]))
        if align_parts:
            align = torch.stack(align_parts).mean()
        else:
            align = torch.zeros((), dtype=cls.dtype)
        total = self.alpha * cls + (1.0 - self.alpha) * align
        return total, float(cls.detach()), float(align.detach()), len(align_parts)

    def _eval_terms(self, model, images, labels, sal_t):
        """Whole-set loss terms: cross-entropy weighted by batch size,
        alignment weighted by per-batch covered-sample counts."""
        n = images.shape[0]
        cls_sum = 0.0
        align_sum = 0.0
        covered_total = 0
        for start in range(0, n, self.batch_size):
            idxs = np.arange(start, min(start + self.batch_size, n))
            _, cls_v, align_v, covered = self._batch_terms(model, images, labels, sal_t, idxs)
            cls_sum += cls_v * len(idxs)
            if align_v is not None and covered:
                align_sum += align_v * covered
                covered_total += covered
        cls = cls_sum / n
        align = align_sum / covered_total if covered_total else None
        if self.guidance == "cyborg":
            total = self.alpha * cls + (1.0 - self.alpha) * (align or 0.0)
        else:
            total = cls
        return total, cls, align

    def _forward_scores(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise RuntimeError("estimator is not fitted")
        X = check_image_batch(X)
        images = torch.from_numpy(np.ascontiguousarray(X, dtype=np.float32))[:, None]
        self.model_.eval()
        probs = []
        with torch.no_grad():
            for start in range(0, images.shape[0], self.batch_size):
                logits, _ = self.model_(images[start : start + self.batch_size])
                probs.append(torch.softmax(logits, dim=1).numpy())
        return np.concatenate(probs, axis=0)

    def predict_proba(self, X) -> np.ndarray:
        return self._forward_scores(X)

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def spoof_scores(self, X) -> np.ndarray:
        """Spoof-class probability per sample (higher = more spoof-like)."""
        return self.predict_proba(X)[:, 1]


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    manifest_path: str
    backbone: str = "toy"
    guidance: str = "none"
    saliency_source: SaliencySource | None = None
    granularity: Granularity | None = None
    alpha: float | None = None
    runs: int = 3
    seed_base: int = 0
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 50
    image_size: int = 224
    pretrained: bool | None = None
    blur_control: bool = False
    blur_radii: tuple[float, ...] = BlurConfig().radii
    mask_smoothing_radius: float = BlurConfig().mask_smoothing_radius
    val_fraction: float = 0.2
    exclude_sample_ids: tuple[str, ...] = ()
    competitors: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.guidance not in GUIDANCE_MODES:
            raise ValueError(f"guidance must be one of {GUIDANCE_MODES}")
        if self.scenario in ("S1", "S2") and self.guidance != "none":
            raise ValueError(f"{self.scenario} is a baseline scenario: guidance must be 'none'")
        if self.guidance == "cyborg":
            if self.alpha is None or self.saliency_source is None:
                raise ValueError("cyborg guidance requires both alpha and saliency_source")
        if self.guidance == "blur" and self.saliency_source is None and not self.blur_control:
            raise ValueError("blur guidance requires saliency_source or the control flag")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        object.__setattr__(self, "blur_radii", tuple(self.blur_radii))
        object.__setattr__(self, "exclude_sample_ids", tuple(self.exclude_sample_ids))
        if self.competitors is not None:
            object.__setattr__(self, "competitors", tuple(self.competitors))

    def to_json_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["saliency_source"] = self.saliency_source.value if self.saliency_source else None
        doc["granularity"] = self.granularity.value if self.granularity else None
        doc["blur_radii"] = list(self.blur_radii)
        doc["exclude_sample_ids"] = list(self.exclude_sample_ids)
        doc["competitors"] = list(self.competitors) if self.competitors else None
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ScenarioConfig":
        doc = dict(doc)
        if doc.get("saliency_source"):
            doc["saliency_source"] = SaliencySource(doc["saliency_source"])
        if doc.get("granularity"):
            doc["granularity"] = Granularity(doc["granularity"])
        for key in ("blur_radii", "exclude_sample_ids", "competitors"):
            if doc.get(key) is not None:
                doc[key] = tuple(doc[key])
        return cls(**doc)


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return ScenarioConfig.from_json_dict(json.load(fh))


@dataclass
class RunResult:
    seed: int
    status: str  # "completed" or "aborted"
    error: str | None = None
    best_epoch: int | None = None
    best_val_total: float | None = None
    history: list[dict] = field(default_factory=list)
    checkpoint_path: str | None = None
    val_scores_path: str | None = None
    test_scores_path: str | None = None
    val_report: EvalReport | None = None
    test_report: EvalReport | None = None


@dataclass
class RunReport:
    config: ScenarioConfig
    runs: list[RunResult]
    aggregate: dict[str, dict[str, float]] | None
    placement_range: tuple[int, int] | None = None

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "runs": [
                {
                    **dataclasses.asdict(r),
                    "val_report": r.val_report.to_json_dict() if r.val_report else None,
                    "test_report": r.test_report.to_json_dict() if r.test_report else None,
                }
                for r in self.runs
            ],
            "aggregate": self.aggregate,
            "placement_range": list(self.placement_range) if self.placement_range else None,
        }


def _scored_set(records: tuple[SampleRecord, ...], scores: np.ndarray) -> ScoredSet:
    return ScoredSet(
        tuple(
            ScoredEntry(r.sample_id, float(s), r.label, r.attack_type)
            for r, s in zip(records, scores)
        )
    )


def _load_saliency_for(
    records: tuple[SampleRecord, ...], config: ScenarioConfig
) -> list[SaliencyMap | None]:
    maps: list[SaliencyMap | None] = []
    for r in records:
        if r.saliency_path is None or r.saliency_source is not config.saliency_source:
            maps.append(None)
            continue
        m = load_saliency(r.saliency_path, Granularity.FOI, r.saliency_source)
        if config.granularity is not None:
            m = at_granularity(m, config.granularity)
        maps.append(m)
    return maps


def _load_images(records: tuple[SampleRecord, ...], image_size: int) -> np.ndarray:
    return np.stack([preprocess(load_image(r.image_path), image_size) for r in records])


def _labels(records: tuple[SampleRecord, ...]) -> np.ndarray:
    return np.array([1 if r.label is Label.SPOOF else 0 for r in records], dtype=np.int64)


def _expand_blur_training_set(
    records: tuple[SampleRecord, ...],
    images: np.ndarray,
    saliency: list[SaliencyMap | None],
    config: ScenarioConfig,
    out_dir: Path,
):
    """Materialize the blur expansion on disk and return the expanded
    training arrays (loaded back from the written files)."""
    blur_cfg = BlurConfig(config.blur_radii, config.mask_smoothing_radius)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    expanded_paths: list[Path] = []
    expanded_labels: list[int] = []
    for r, image, sal in zip(records, images, saliency):
        variants: list[tuple[str, float | None, np.ndarray]] = []
        if config.blur_control:
            variants.append((f"{r.sample_id}__orig.png", None, image))
            variants.extend(
                (f"{r.sample_id}__blur{radius:g}.png", radius, gaussian_blur(image, radius))
                for radius in blur_cfg.radii
            )
        else:
            if sal is None:
                raise ValueError(f"sample {r.sample_id!r} has no saliency map for blur guidance")
            variants.extend(
                (
                    f"{r.sample_id}__blur{radius:g}.png",
                    radius,
                    blur_nonsalient(image, sal, radius, blur_cfg),
                )
                for radius in blur_cfg.radii
            )
        for name, radius, out_image in variants:
            path = out_dir / name
            save_image(out_image, path)
            rows.append([str(path), r.sample_id, "" if radius is None else radius])
            expanded_paths.append(path)
            expanded_labels.append(1 if r.label is Label.SPOOF else 0)
    with open(out_dir / "expansion.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["output_path", "sample_id", "radius"])
        writer.writerows(rows)
    X = np.stack([load_image(p) for p in expanded_paths])
    return X, np.array(expanded_labels, dtype=np.int64)


def run_scenario(config: ScenarioConfig, out_dir: str | Path) -> RunReport:
    """Execute one scenario: ``runs`` seeded trainings, best-validation
    checkpoint selection, score files for the validation and test splits,
    and the mean/std aggregate."""
    from .data import read_manifest  # local import to keep module load light

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = read_manifest(config.manifest_path)
    if config.exclude_sample_ids:
        excluded = set(config.exclude_sample_ids)
        manifest = Manifest(
            tuple(r for r in manifest.records if r.sample_id not in excluded),
            manifest.schema_version,
        )
    if not manifest.subset(Split.VAL):
        manifest = split_validation(manifest, config.val_fraction, config.seed_base)
    train_records = manifest.subset(Split.TRAIN)
    val_records = manifest.subset(Split.VAL)
    test_records = manifest.subset(Split.TEST)
    if not train_records or not val_records:
        raise ValueError("manifest must provide train and val records")

    train_images = _load_images(train_records, config.image_size)
    val_images = _load_images(val_records, config.image_size)
    test_images = _load_images(test_records, config.image_size) if test_records else None
    train_labels = _labels(train_records)
    val_labels = _labels(val_records)

    train_sal = val_sal = None
    if config.guidance == "cyborg":
        train_sal = _load_saliency_for(train_records, config)
        if all(m is None for m in train_sal):
            raise ValueError(
                f"no training sample carries {config.saliency_source.value} saliency; "
                "cyborg guidance rejected before training"
            )
        val_sal = _load_saliency_for(val_records, config)
    elif config.guidance == "blur":
        sal = None
        if not config.blur_control:
            sal = _load_saliency_for(train_records, config)
            if all(m is None for m in sal):
                raise ValueError(
                    f"no training sample carries "
                    f"{config.saliency_source.value} saliency; "
                    "blur guidance rejected before training"
                )
        train_images, train_labels = _expand_blur_training_set(
            train_records, train_images,
            sal if sal is not None else [None] * len(train_records),
            config, out_dir / "expanded",
        )

    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config.to_json_dict(), fh, indent=2)

    estimator_guidance = "cyborg" if config.guidance == "cyborg" else "none"
    results: list[RunResult] = []
    for r in range(config.runs):
        seed = config.seed_base + r
        run_dir = out_dir / f"run_{r}"
        run_dir.mkdir(exist_ok=True)
        result = RunResult(seed=seed, status="completed")
        clf = CyborgPadClassifier(
            backbone=config.backbone,
            guidance=estimator_guidance,
            alpha=config.alpha,
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            epochs=config.epochs,
            seed=seed,
            pretrained=config.pretrained,
        )
        try:
            clf.fit(
                train_images, train_labels, saliency=train_sal,
                X_val=val_images, y_val=val_labels, saliency_val=val_sal,
                log_path=run_dir / "training_log.csv",
            )
        except TrainingDiverged as exc:
            logger.error("run %d aborted: %s", r, exc)
            result.status = "aborted"
            result.error = str(exc)
            results.append(result)
            continue
        result.best_epoch = clf.best_epoch_
        result.best_val_total = clf.best_val_total_
        result.history = clf.history_
        checkpoint_path = run_dir / "checkpoint"
        torch.save(
            {"backbone": config.backbone, "state_dict": clf.model_.state_dict(),
             "seed": seed, "best_epoch": clf.best_epoch_},
            checkpoint_path,
        )
        result.checkpoint_path = str(checkpoint_path)

        val_set = _scored_set(val_records, clf.spoof_scores(val_images))
        write_scores(val_set, run_dir / "val_scores.csv")
        result.val_scores_path = str(run_dir / "val_scores.csv")
        threshold = eer_threshold(val_set)
        result.val_report = evaluate(val_set, threshold)
        if test_records:
            test_set = _scored_set(test_records, clf.spoof_scores(test_images))
            write_scores(test_set, run_dir / "test_scores.csv")
            result.test_scores_path = str(run_dir / "test_scores.csv")
            result.test_report = evaluate(test_set, threshold)
        results.append(result)

    report = RunReport(config, results, aggregate=None)
    completed = [r for r in results if r.status == "completed"]
    if len(completed) == config.runs:
        reports = [
            (r.test_report if r.test_report is not None else r.val_report) for r in completed
        ]
        report.aggregate = _aggregate_metrics(reports)
        if config.competitors and "accuracy" in report.aggregate:
            acc = report.aggregate["accuracy"]
            report.placement_range = placement(
                acc["mean"], acc.get("std", 0.0), list(config.competitors)
            )
    with open(out_dir / "aggregate.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=2)
    return report


def _aggregate_metrics(reports: list[EvalReport]) -> dict[str, dict[str, float]]:
    """Mean and sample (n-1) standard deviation per metric; with a single
    run the std field is absent rather than zero."""
    metrics: dict[str, list[float]] = {}
    for rep in reports:
        doc = rep.to_json_dict()
        for key in ("auc", "accuracy", "bonafide_accuracy", "spoof_accuracy",
                    "d_prime", "fnr_at_fpr01"):
            metrics.setdefault(key, []).append(doc[key])
        for attack, acc in rep.per_attack_accuracy.items():
            metrics.setdefault(f"attack_accuracy.{attack}", []).append(acc)
    out: dict[str, dict[str, float]] = {}
    for key, values in metrics.items():
        entry = {"mean": float(np.mean(values))}
        if len(values) > 1:
            entry["std"] = float(np.std(values, ddof=1))
        out[key] = entry
    return out


def alpha_sweep(
    base: ScenarioConfig,
    alphas: tuple[float, ...] = DEFAULT_ALPHA_GRID,
    out_root: str | Path = "sweep",
) -> list[RunReport]:
    """One scenario run per alpha with identical seeds, for paired
    comparison across the blend grid."""
    if base.guidance != "cyborg":
        raise ValueError("alpha sweep requires a cyborg-guidance base config")
    if not alphas:
        raise ValueError("alpha list must be non-empty")
    out_root = Path(out_root)
    reports = []
    for alpha in alphas:
        config = dataclasses.replace(base, alpha=alpha)
        reports.append(run_scenario(config, out_root / f"alpha_{alpha:g}"))
    return reports
