"""Augmentation pipeline and the imbalance experiment grid.

Per grid cell (dataset x IR x method x setting x replicate)::

    split -> make_imbalanced -> [augment] -> oversample -> train -> evaluate

Settings: ``os`` oversamples the raw imbalanced set; ``our+os`` augments
with validator filtering first; ``wo-val`` augments without filtering.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import segmenter
from .corpus import Dataset, Sample, SplitSpec, load_dataset, make_imbalanced, oversample, split
from .errors import ConfigError, DiscaugError
from .models import ClassifierKind, TrainConfig, accuracy_fraction, predict_many, train
from .segmenter import Candidate, MarkerSet

log = logging.getLogger(__name__)

OS = "os"
OUR_OS = "our+os"
WO_VAL = "wo-val"
SETTINGS = (OS, OUR_OS, WO_VAL)
_SETTING_ALIASES = {"our-only": WO_VAL, "wo/val": WO_VAL, "wo_val": WO_VAL, "our": OUR_OS}

CELL_HEADER = ("dataset", "ir", "method", "setting", "seed", "accuracy")
AGG_HEADER = ("dataset", "ir", "method", "setting", "mean_accuracy", "mean_improvement_vs_os")


def parse_setting(value: str) -> str:
    value = value.strip().lower()
    value = _SETTING_ALIASES.get(value, value)
    if value not in SETTINGS:
        raise ConfigError(f"unknown setting {value!r}; choose from {', '.join(SETTINGS)}")
    return value


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from an arbitrary tuple of str/int parts."""
    digest = hashlib.sha256(repr(tuple(parts)).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def validate_filter(cands: Sequence[Candidate], validator, min_confidence: float = 0.0) -> list[Candidate]:
    """Keep candidates whose predicted label equals the proposed label."""
    if not cands:
        return []
    labels, conf = predict_many(validator, [c.tokens for c in cands])
    return [
        c for c, lab, p in zip(cands, labels, conf)
        if lab == c.proposed_label and p >= min_confidence
    ]


def augment(train_set: Dataset, markers=None, validator=None, *, validate: bool = True,
            min_confidence: float = 0.0) -> Dataset:
    """Add harvested (and, by default, validator-approved) candidates to ``train_set``."""
    cands = segmenter.harvest(train_set, markers)
    if validate:
        if validator is None:
            raise ConfigError("augment needs a validator unless validation is disabled")
        cands = validate_filter(cands, validator, min_confidence)
    start = train_set.next_id()
    added = [Sample(c.tokens, c.proposed_label, start + k) for k, c in enumerate(cands)]
    return train_set.replace(train_set.samples + tuple(added))


def rebalance_and_train(aug: Dataset, cfg: TrainConfig, seed: int):
    """Oversample to equal class counts, then train with ``seed``."""
    balanced = oversample(aug, seed)
    return train(balanced, cfg.with_seed(seed))


@dataclass(frozen=True)
class DatasetSource:
    name: str
    mode: str
    paths: tuple

    def load(self) -> Dataset:
        source = self.paths[0] if self.mode == "tsv" else self.paths
        return load_dataset(source, self.mode, self.name)


@dataclass
class ExperimentConfig:
    datasets: Sequence  # DatasetSource or Dataset
    irs: Sequence[int] = (5,)
    methods: Sequence[str] = ("nb", "lr", "cnn", "rnn")
    settings: Sequence[str] = (OS, OUR_OS)
    seeds: int = 1
    global_seed: int = 0
    markers: MarkerSet = field(default_factory=MarkerSet)
    validator_path: str | None = None
    validator_config: TrainConfig = field(default_factory=TrainConfig.validator)
    model_overrides: dict = field(default_factory=dict)
    train_fraction: float = 0.8
    min_confidence: float = 0.0

    def __post_init__(self):
        if not self.datasets or not self.irs or not self.methods or not self.settings:
            raise ConfigError("datasets, irs, methods and settings must be non-empty")
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        for ir in self.irs:
            if int(ir) != ir or ir < 1:
                raise ConfigError(f"imbalance ratios must be integers >= 1, got {ir}")
        self.irs = tuple(int(ir) for ir in self.irs)
        self.methods = tuple(ClassifierKind.parse(m).value for m in self.methods)
        self.settings = tuple(parse_setting(s) for s in self.settings)
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train fraction must lie in (0, 1), got {self.train_fraction}")

    def model_config(self, method: str) -> TrainConfig:
        kind = ClassifierKind.parse(method)
        overrides = dict(self.model_overrides.get("all", {}))
        overrides.update(self.model_overrides.get(kind.value, {}))
        return TrainConfig.for_kind(kind, **overrides)


@dataclass(frozen=True)
class CellResult:
    dataset: str
    ir: int
    method: str
    setting: str
    seed: int
    accuracy: Fraction | None = None
    error: str | None = None


def _fmt(value) -> str:
    return f"{float(value):.4f}"


@dataclass
class ResultTable:
    rows: list[CellResult]

    @property
    def has_errors(self) -> bool:
        return any(r.error is not None for r in self.rows)

    def _groups(self):
        groups = {}
        for r in self.rows:
            groups.setdefault((r.dataset, r.ir, r.method, r.setting), []).append(r)
        return groups

    def aggregates(self):
        """Mean accuracy per (dataset, ir, method, setting) and the mean
        paired improvement over the ``os`` cell of the same replicate.

        Missing values (all cells errored, no ``os`` baseline) are None.
        """
        groups = self._groups()
        out = []
        for (ds, ir, method, setting), rows in groups.items():
            accs = [r.accuracy for r in rows if r.accuracy is not None]
            mean_acc = sum(accs) / len(accs) if accs else None
            improvement = None
            base = groups.get((ds, ir, method, OS))
            if setting != OS and base is not None:
                base_by_seed = {b.seed: b.accuracy for b in base if b.accuracy is not None}
                diffs = [r.accuracy - base_by_seed[r.seed] for r in rows
                         if r.accuracy is not None and r.seed in base_by_seed]
                if diffs:
                    improvement = sum(diffs) / len(diffs)
            out.append((ds, ir, method, setting, mean_acc, improvement))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CELL_HEADER)
        for r in self.rows:
            acc = _fmt(r.accuracy) if r.error is None else f"error: {r.error}"
            writer.writerow((r.dataset, r.ir, r.method, r.setting, r.seed, acc))
        buf.write("\n")
        writer.writerow(AGG_HEADER)
        for ds, ir, method, setting, mean_acc, imp in self.aggregates():
            writer.writerow((ds, ir, method, setting,
                             "-" if mean_acc is None else _fmt(mean_acc),
                             "-" if imp is None else _fmt(imp)))
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    def pivot(self) -> str:
        """Layout: one row per (IR, method, setting), one accuracy
        column per dataset (percent), and the average improvement."""
        datasets = list(dict.fromkeys(r.dataset for r in self.rows))
        cells = {}
        for ds, ir, method, setting, mean_acc, imp in self.aggregates():
            cells[(ir, method, setting, ds)] = (mean_acc, imp)
        keys = list(dict.fromkeys((r.ir, r.method, r.setting) for r in self.rows))
        lines = ["| IR | Method | Setting | " + " | ".join(datasets) + " | Avg improvement |",
                 "|---|---|---|" + "---|" * len(datasets) + "---|"]
        for ir, method, setting in keys:
            accs, imps = [], []
            for ds in datasets:
                mean_acc, imp = cells.get((ir, method, setting, ds), (None, None))
                accs.append("-" if mean_acc is None else f"{100 * float(mean_acc):.2f}")
                if imp is not None:
                    imps.append(float(imp))
            avg = f"{100 * sum(imps) / len(imps):.2f}" if imps else "-"
            lines.append(f"| {ir} | {method.upper()} | {setting} | " + " | ".join(accs) + f" | {avg} |")
        return "\n".join(lines) + "\n"


class _Lazy:
    """Memoize a computation, including the exception it raised."""

    def __init__(self, fn):
        self.fn = fn
        self.done = False
        self.value = None
        self.error = None

    def get(self):
        if not self.done:
            try:
                self.value = self.fn()
            except (DiscaugError, ValueError, ArithmeticError) as exc:
                self.error = exc
            self.done = True
        if self.error is not None:
            raise self.error
        return self.value


def _load(source) -> Dataset:
    return source if isinstance(source, Dataset) else source.load()


def run_experiment(cfg: ExperimentConfig, progress=None) -> ResultTable:
    """Run the full grid; deterministic given ``cfg``.

    Split, imbalance and validator depend only on (dataset, replicate[, IR]),
    so every method and setting of a replicate sees the same data.  Cell
    failures become error rows instead of aborting the sweep.
    """
    from .models import load_model

    shared_validator = load_model(cfg.validator_path) if cfg.validator_path else None
    rows = []
    for source in cfg.datasets:
        data = _load(source)
        name = data.name
        for rep in range(cfg.seeds):
            spec = SplitSpec(cfg.train_fraction, derive_seed(cfg.global_seed, name, "split", rep))
            train_set, test_set = split(data, spec)

            def fit_validator(train_set=train_set, rep=rep):
                if shared_validator is not None:
                    return shared_validator
                vcfg = cfg.validator_config.with_seed(derive_seed(cfg.global_seed, name, "validator", rep))
                log.info("training validator for %s replicate %d", name, rep)
                return train(train_set, vcfg)

            validator = _Lazy(fit_validator)
            for ir in cfg.irs:
                imbalanced = _Lazy(lambda ir=ir, train_set=train_set, rep=rep: make_imbalanced(
                    train_set, ir, derive_seed(cfg.global_seed, name, ir, "imbalance", rep)))
                variants = {
                    OS: imbalanced,
                    OUR_OS: _Lazy(lambda imbalanced=imbalanced, validator=validator: augment(
                        imbalanced.get(), cfg.markers, validator.get(),
                        min_confidence=cfg.min_confidence)),
                    WO_VAL: _Lazy(lambda imbalanced=imbalanced: augment(
                        imbalanced.get(), cfg.markers, validate=False)),
                }
                for method in cfg.methods:
                    mcfg = cfg.model_config(method)
                    for setting in cfg.settings:
                        seed = derive_seed(cfg.global_seed, name, ir, method, setting, rep)
                        try:
                            model = rebalance_and_train(variants[setting].get(), mcfg, seed)
                            cell = CellResult(name, ir, method, setting, rep,
                                              accuracy_fraction(model, test_set))
                        except (DiscaugError, ValueError, ArithmeticError) as exc:
                            log.warning("cell %s/%s/%s/%s/%d failed: %s", name, ir, method, setting, rep, exc)
                            cell = CellResult(name, ir, method, setting, rep,
                                              error=f"{type(exc).__name__}: {exc}")
                        rows.append(cell)
                        if progress is not None:
                            progress(cell)
    dataset_order = {s.name: i for i, s in enumerate(cfg.datasets)}
    rows.sort(key=lambda r: (
        dataset_order.get(r.dataset, 0), cfg.irs.index(r.ir), cfg.methods.index(r.method),
        cfg.settings.index(r.setting), r.seed,
    ))
    return ResultTable(rows)
