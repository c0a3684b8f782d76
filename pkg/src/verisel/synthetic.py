"""Synthetic planted-signal datasets for desk-scale experiments.

Every generated graph has one "source marker" node (kind 3) placed after one
"target marker" node (kind 2) in a forward ICFG chain. Positive graphs carry
exactly one extra loop-back ICFG edge from the source marker to the target
marker; negative graphs never contain that pair in any edge set. Since node
kinds and all other wiring are sampled identically for both classes, the
planted back edge is the only class signal, which makes these datasets
suitable both for overfitting experiments and for checking that the edge
explainer recovers the edge that matters.

Labels follow the structural rule: verifier 0 wins on graphs with the
planted loop-back edge, verifier 2 wins otherwise, verifier 1 is always the
middle choice. A verifier "succeeds" when its label is positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphio import LabeledInstance, ProgramGraph, PropertyKind, TokenVocabulary
from .model import ModelConfig

SYNTHETIC_KINDS = ("Unknown",) + tuple(f"K{i}" for i in range(1, 10))
TARGET_KIND = 2
SOURCE_KIND = 3
POSITIVE_LABELS = (2.0, 1.0, 0.0)
NEGATIVE_LABELS = (0.0, 1.0, 2.0)
PORTFOLIO = ("loopback-prover", "steady", "straightline-prover")


def synthetic_vocabulary() -> TokenVocabulary:
    return TokenVocabulary(SYNTHETIC_KINDS)


@dataclass(frozen=True)
class PlantedGraph:
    instance: LabeledInstance
    positive: bool
    planted: tuple[str, int, int] | None  # (edge set, src, dst) when positive


def _random_pairs(rng, n, count, forbidden, forward_only=False):
    pairs = set()
    for _ in range(count):
        pair = (int(rng.integers(0, n)), int(rng.integers(0, n)))
        if forward_only and pair[0] >= pair[1]:
            continue
        if pair != forbidden:
            pairs.add(pair)
    return sorted(pairs)


def planted_graph(rng: np.random.Generator, *, positive: bool,
                  graph_id: str) -> PlantedGraph:
    n = int(rng.integers(8, 13))
    target = int(rng.integers(1, n - 2))
    source = int(rng.integers(target + 1, n))
    kinds = [int(rng.integers(4, len(SYNTHETIC_KINDS))) for _ in range(n)]
    kinds[0] = 1
    kinds[target] = TARGET_KIND
    kinds[source] = SOURCE_KIND

    planted_pair = (source, target)
    ast = sorted((int(rng.integers(0, i)), i) for i in range(1, n))
    # forward chain plus forward-only extras: the planted pair is the only
    # loop-back control edge a positive graph has, and negatives have none
    icfg = {(i, i + 1) for i in range(n - 1)}
    icfg.update(_random_pairs(rng, n, int(rng.integers(0, 3)), planted_pair,
                              forward_only=True))
    dfg = _random_pairs(rng, n, int(rng.integers(1, 4)), planted_pair)
    if positive:
        icfg.add(planted_pair)

    graph = ProgramGraph(
        id=graph_id,
        property=PropertyKind.REACH_SAFETY,
        node_kinds=kinds,
        edge_sets={"AST": [p for p in ast if p != planted_pair],
                   "ICFG": sorted(icfg), "DFG": dfg},
    )
    labels = list(POSITIVE_LABELS if positive else NEGATIVE_LABELS)
    instance = LabeledInstance(graph, labels, [v > 0.5 for v in labels])
    planted = ("ICFG", source, target) if positive else None
    return PlantedGraph(instance, positive, planted)


def planted_dataset(count: int, seed: int = 0) -> list[PlantedGraph]:
    """Alternating positive/negative instances, deterministic per seed."""
    rng = np.random.default_rng(seed)
    return [
        planted_graph(rng, positive=(i % 2 == 0), graph_id=f"synthetic-{seed}-{i:03d}")
        for i in range(count)
    ]


def instances_of(dataset: list[PlantedGraph]) -> list[LabeledInstance]:
    return [item.instance for item in dataset]


def experiment_config() -> ModelConfig:
    """Architecture sized for the planted-signal experiments."""
    return ModelConfig(num_gat_layers=1, gat_width=16, pool_hidden=(16, 8))
