"""Training loop, ranking metrics, and static/random baselines.

Training performs one gradient step per instance (no batching) on the
pairwise margin ranking loss, using Adam-style moment estimates with the
standard decay constants. After any three consecutive epochs without a
strictly lower validation loss the learning rate drops by a factor of ten;
training stops at the epoch cap or once a drop would land below the floor.
The returned parameters are the snapshot with the best validation loss.
"""

from __future__ import annotations

import json
import random
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as tz
from .graphio import LabeledInstance
from .model import (
    LengthMismatch,
    ModelParameters,
    RankingResult,
    forward_scores,
    margin_rank_loss_t,
)


class EmptySplit(Exception):
    """Training needs nonempty train and validation sets."""


class InvalidRanking(Exception):
    """A rank vector is not a permutation of 1..k."""


class NoEligibleInstances(Exception):
    """Success-accuracy filtering removed every instance."""


class BadK(Exception):
    """K outside 1..portfolio size."""


class DegenerateRankingWarning(UserWarning):
    """A constant vector has no defined rank correlation; 0 is reported."""


# ---------------------------------------------------------------------------
# metrics


def _average_ranks(values: Sequence[float]) -> list[float]:
    """Ranks 1..n, averaging over ties (rank 1 = largest value)."""
    order = sorted(range(len(values)), key=lambda i: (-values[i], i))
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for pos in range(i, j + 1):
            ranks[order[pos]] = mean_rank
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Rank correlation via the squared rank-difference formula.

    Ties get average ranks. A constant input has no defined correlation;
    the sentinel 0.0 is returned and a DegenerateRankingWarning emitted.
    """
    if len(x) != len(y) or len(x) < 2:
        raise LengthMismatch(f"{len(x)} vs {len(y)} values (need equal, >= 2)")
    if min(x) == max(x) or min(y) == max(y):
        warnings.warn("constant vector in rank correlation",
                      DegenerateRankingWarning, stacklevel=2)
        return 0.0
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    n = len(x)
    d2 = sum((a - b) ** 2 for a, b in zip(rx, ry))
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


def ordinal_ranking(labels: Sequence[float]) -> list[int]:
    """Permutation of 1..k: rank 1 = highest label, ties by lower index."""
    order = sorted(range(len(labels)), key=lambda i: (-labels[i], i))
    ranks = [0] * len(labels)
    for position, idx in enumerate(order):
        ranks[idx] = position + 1
    return ranks


def best_verifier(labels: Sequence[float]) -> int:
    """Index of the top label; ties go to the lowest index."""
    return max(range(len(labels)), key=lambda i: (labels[i], -i))


def borda_ordering(rankings: Sequence[Sequence[float]], num_verifiers: int) -> list[int]:
    """Static ordering by descending Borda count (sum of k - rank)."""
    counts = [0.0] * num_verifiers
    for ranking in rankings:
        if sorted(ranking) != list(range(1, num_verifiers + 1)):
            raise InvalidRanking(f"not a permutation of 1..{num_verifiers}: {ranking}")
        for verifier, rank in enumerate(ranking):
            counts[verifier] += num_verifiers - rank
    return sorted(range(num_verifiers), key=lambda v: (-counts[v], v))


def success_accuracy(
    orderings: Sequence[Sequence[int]],
    successes: Sequence[Sequence[bool]],
) -> float:
    """Top-1 hit rate over instances where some verifiers (not all) succeed."""
    hits = 0
    eligible = 0
    for ordering, flags in zip(orderings, successes):
        wins = sum(flags)
        if wins == 0 or wins == len(flags):
            continue
        eligible += 1
        if flags[ordering[0]]:
            hits += 1
    if eligible == 0:
        raise NoEligibleInstances("every instance was filtered out")
    return hits / eligible


def topk_error(
    orderings: Sequence[Sequence[int]],
    best: Sequence[int],
    k_select: int,
) -> float:
    """Fraction of instances whose best verifier misses the first K picks."""
    if not orderings:
        raise NoEligibleInstances("no instances")
    size = len(orderings[0])
    if not 1 <= k_select <= size:
        raise BadK(f"K={k_select} outside 1..{size}")
    misses = sum(
        1 for ordering, target in zip(orderings, best)
        if target not in ordering[:k_select]
    )
    return misses / len(orderings)


# ---------------------------------------------------------------------------
# baselines


@dataclass(frozen=True)
class Baselines:
    iss_success: int        # single verifier with the most correct outcomes
    iss_rank: tuple[int, ...]    # Borda ordering of the training rankings
    iss_topk: tuple[int, ...]    # verifiers by how often they were best


def baselines(train_set: Sequence[LabeledInstance]) -> Baselines:
    if not train_set:
        raise EmptySplit("baselines need a nonempty training set")
    k = len(train_set[0].labels)
    success_counts = [0] * k
    best_counts = [0] * k
    rankings = []
    for inst in train_set:
        for v, ok in enumerate(inst.successes):
            success_counts[v] += bool(ok)
        best_counts[best_verifier(inst.labels)] += 1
        rankings.append(ordinal_ranking(inst.labels))
    return Baselines(
        iss_success=max(range(k), key=lambda v: (success_counts[v], -v)),
        iss_rank=tuple(borda_ordering(rankings, k)),
        iss_topk=tuple(sorted(range(k), key=lambda v: (-best_counts[v], v))),
    )


def random_orderings(num_instances: int, k: int, seed: int) -> list[list[int]]:
    """Reproducible uniform orderings, one per instance."""
    rng = random.Random(seed)
    out = []
    for _ in range(num_instances):
        ordering = list(range(k))
        rng.shuffle(ordering)
        out.append(ordering)
    return out


def static_results(ordering: Sequence[int], instances: Sequence[LabeledInstance]) -> list[RankingResult]:
    """Wrap a fixed ordering as per-instance results (scores = k - position)."""
    k = len(ordering)
    scores = [0.0] * k
    for position, verifier in enumerate(ordering):
        scores[verifier] = float(k - position)
    return [
        RankingResult(inst.graph.id, tuple(scores), tuple(ordering))
        for inst in instances
    ]


def results_from_orderings(orderings: Sequence[Sequence[int]],
                           instances: Sequence[LabeledInstance]) -> list[RankingResult]:
    out = []
    for ordering, inst in zip(orderings, instances):
        k = len(ordering)
        scores = [0.0] * k
        for position, verifier in enumerate(ordering):
            scores[verifier] = float(k - position)
        out.append(RankingResult(inst.graph.id, tuple(scores), tuple(ordering)))
    return out


# ---------------------------------------------------------------------------
# evaluation report


@dataclass
class MetricBlock:
    success_accuracy: float | None
    spearman_mean: float
    topk_error: dict[int, float]
    num_instances: int
    num_all_solved: int
    num_none_solved: int

    def to_dict(self) -> dict:
        return {
            "success_accuracy": self.success_accuracy,
            "spearman_mean": self.spearman_mean,
            "topk_error": {str(k): v for k, v in sorted(self.topk_error.items())},
            "num_instances": self.num_instances,
            "num_all_solved": self.num_all_solved,
            "num_none_solved": self.num_none_solved,
        }


@dataclass
class EvalReport:
    overall: MetricBlock
    per_property: dict[str, MetricBlock]

    def to_dict(self) -> dict:
        return {
            "overall": self.overall.to_dict(),
            "per_property": {
                name: block.to_dict()
                for name, block in sorted(self.per_property.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        lines = []
        ks = sorted(self.overall.topk_error)
        header = ["section", "n", "success", "spearman"] + [f"top{k}" for k in ks]
        rows = [header]
        for name, block in [("overall", self.overall)] + sorted(self.per_property.items()):
            success = "n/a" if block.success_accuracy is None else f"{block.success_accuracy:.3f}"
            row = [name, str(block.num_instances), success,
                   f"{block.spearman_mean:.3f}"]
            row += [f"{block.topk_error.get(k, float('nan')):.3f}" for k in ks]
            rows.append(row)
        widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
        for r in rows:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)))
        return "\n".join(lines) + "\n"


def _metric_block(results: Sequence[RankingResult],
                  instances: Sequence[LabeledInstance],
                  ks: Sequence[int]) -> MetricBlock:
    orderings = [r.ordering for r in results]
    all_solved = sum(1 for inst in instances if all(inst.successes))
    none_solved = sum(1 for inst in instances if not any(inst.successes))
    try:
        success = success_accuracy(orderings, [i.successes for i in instances])
    except NoEligibleInstances:
        success = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateRankingWarning)
        rhos = [
            spearman(inst.labels, list(result.scores))
            for inst, result in zip(instances, results)
        ]
    best = [best_verifier(inst.labels) for inst in instances]
    return MetricBlock(
        success_accuracy=success,
        spearman_mean=float(np.mean(rhos)) if rhos else 0.0,
        topk_error={k: topk_error(orderings, best, k) for k in ks},
        num_instances=len(instances),
        num_all_solved=all_solved,
        num_none_solved=none_solved,
    )


def evaluate_rankings(results: Sequence[RankingResult],
                      instances: Sequence[LabeledInstance],
                      ks: Sequence[int] | None = None) -> EvalReport:
    """The three ranking metrics, overall and per property."""
    if len(results) != len(instances) or not instances:
        raise LengthMismatch(f"{len(results)} results vs {len(instances)} instances")
    k = len(instances[0].labels)
    ks = sorted(set(ks or range(1, k + 1)))
    overall = _metric_block(results, instances, ks)
    per_property: dict[str, MetricBlock] = {}
    names = sorted({inst.graph.property.value for inst in instances})
    for name in names:
        pick = [
            (res, inst) for res, inst in zip(results, instances)
            if inst.graph.property.value == name
        ]
        per_property[name] = _metric_block(
            [p[0] for p in pick], [p[1] for p in pick], ks
        )
    return EvalReport(overall=overall, per_property=per_property)


# ---------------------------------------------------------------------------
# plateau schedule


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    initial_lr: float = 1e-3
    plateau_patience: int = 3
    lr_decay_factor: float = 0.1
    min_lr: float = 1e-8
    margin: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.plateau_patience < 1:
            raise ValueError("epochs and patience must be >= 1")
        if min(self.initial_lr, self.lr_decay_factor, self.min_lr, self.margin) <= 0:
            raise ValueError("rates, factor, floor, and margin must be positive")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "initial_lr": self.initial_lr,
            "plateau_patience": self.plateau_patience,
            "lr_decay_factor": self.lr_decay_factor,
            "min_lr": self.min_lr,
            "margin": self.margin,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


@dataclass
class EpochDecision:
    improved: bool
    lr: float        # learning rate for the *next* epoch
    decayed: bool
    stop: bool       # a decay fell below the floor


@dataclass
class PlateauSchedule:
    """Decay lr by `factor` after `patience` consecutive non-improving epochs."""

    lr: float
    patience: int = 3
    factor: float = 0.1
    min_lr: float = 1e-8
    best: float = field(default=float("inf"))
    bad_epochs: int = field(default=0)

    def observe(self, val_loss: float) -> EpochDecision:
        if val_loss < self.best:
            self.best = val_loss
            self.bad_epochs = 0
            return EpochDecision(improved=True, lr=self.lr, decayed=False, stop=False)
        self.bad_epochs += 1
        if self.bad_epochs < self.patience:
            return EpochDecision(improved=False, lr=self.lr, decayed=False, stop=False)
        self.bad_epochs = 0
        lowered = self.lr * self.factor
        if lowered < self.min_lr:
            return EpochDecision(improved=False, lr=self.lr, decayed=False, stop=True)
        self.lr = lowered
        return EpochDecision(improved=False, lr=self.lr, decayed=True, stop=False)


# ---------------------------------------------------------------------------
# training


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "train_loss": self.train_loss,
                "val_loss": self.val_loss, "lr": self.lr}


@dataclass
class TrainHistory:
    epochs: list[EpochStats]
    stop_reason: str  # epoch_cap | lr_floor

    def to_dict(self) -> dict:
        return {
            "epochs": [e.to_dict() for e in self.epochs],
            "stop_reason": self.stop_reason,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _instance_loss(inst: LabeledInstance, params: ModelParameters, margin: float):
    scores = forward_scores(inst.graph, params)
    return margin_rank_loss_t(scores, inst.labels, margin)


class _AdamState:
    """Per-parameter first/second moment estimates (beta 0.9/0.999)."""

    def __init__(self, tensors, beta1=0.9, beta2=0.999, eps=1e-8):
        self.tensors = tensors
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros(t.shape) for t in tensors]
        self.v = [np.zeros(t.shape) for t in tensors]

    def step(self, lr: float) -> None:
        self.step_count += 1
        correct1 = 1.0 - self.beta1 ** self.step_count
        correct2 = 1.0 - self.beta2 ** self.step_count
        for i, t in enumerate(self.tensors):
            if t.grad is None:
                continue
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * t.grad
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * t.grad ** 2
            t.values -= lr * (self.m[i] / correct1) / (
                np.sqrt(self.v[i] / correct2) + self.eps
            )


def validation_loss(instances: Sequence[LabeledInstance],
                    params: ModelParameters, margin: float) -> float:
    with tz.no_grad():
        losses = [_instance_loss(inst, params, margin).item() for inst in instances]
    return float(np.mean(losses))


def train(
    train_set: Sequence[LabeledInstance],
    val_set: Sequence[LabeledInstance],
    init: ModelParameters,
    cfg: TrainConfig,
) -> tuple[ModelParameters, TrainHistory]:
    """Per-instance SGD with the plateau schedule; returns best-val params."""
    if not train_set or not val_set:
        raise EmptySplit("train and validation sets must be nonempty")
    widths = {len(inst.labels) for inst in list(train_set) + list(val_set)}
    if widths != {len(init.portfolio)}:
        raise LengthMismatch(
            f"label widths {sorted(widths)} vs portfolio {len(init.portfolio)}"
        )

    params = init.copy()
    optimizer = _AdamState(params.trainables())
    schedule = PlateauSchedule(
        lr=cfg.initial_lr, patience=cfg.plateau_patience,
        factor=cfg.lr_decay_factor, min_lr=cfg.min_lr,
    )
    rng = random.Random(cfg.seed)
    best_params = params.copy()
    history: list[EpochStats] = []
    stop_reason = "epoch_cap"

    order = list(range(len(train_set)))
    for epoch in range(1, cfg.epochs + 1):
        lr = schedule.lr
        rng.shuffle(order)
        total = 0.0
        for idx in order:
            inst = train_set[idx]
            params.zero_grad()
            loss = _instance_loss(inst, params, cfg.margin)
            total += loss.item()
            if loss.requires_grad:
                tz.backward(loss)
                optimizer.step(lr)
        val = validation_loss(val_set, params, cfg.margin)
        history.append(EpochStats(epoch, total / len(train_set), val, lr))
        decision = schedule.observe(val)
        if decision.improved:
            best_params = params.copy()
        if decision.stop:
            stop_reason = "lr_floor"
            break
    return best_params, TrainHistory(history, stop_reason)
