"""Program-graph data model, token vocabulary, label ingestion, and splits.

File formats owned by this module:

* Graph file: JSON object ``{"id", "property", "num_nodes", "node_kinds",
  "edges": {"AST": [[src, dst], ...], "ICFG": [...], "DFG": [...]}}``.
* Labels file: CSV with header
  ``program_id,property,verifier,svcomp_score,cpu_seconds,outcome[,label]``.
* Vocabulary manifest: newline-delimited kind names, line 0 = ``Unknown``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import random
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EDGE_SET_NAMES = ("AST", "ICFG", "DFG")

# Every node kind the bundled frontend can emit, in manifest order.
DEFAULT_KINDS = (
    "Unknown",
    "TranslationUnit",
    "TypedefDecl",
    "FunctionDecl",
    "ParmVarDecl",
    "DeclStmt",
    "VarDecl",
    "CompoundStmt",
    "IfStmt",
    "WhileStmt",
    "ForStmt",
    "SwitchStmt",
    "CaseStmt",
    "DefaultStmt",
    "BreakStmt",
    "ContinueStmt",
    "ReturnStmt",
    "LabelStmt",
    "NullStmt",
    "BinaryOperator",
    "CompoundAssignOperator",
    "UnaryOperator",
    "CallExpr",
    "DeclRefExpr",
    "ArraySubscriptExpr",
    "IntegerLiteral",
    "FloatingLiteral",
    "CharacterLiteral",
    "StringLiteral",
)


class SchemaError(Exception):
    """A serialized artifact violates its schema; the message names the field."""


class EmptyStratumWarning(UserWarning):
    """A property stratum is too small to split meaningfully."""


class PropertyKind(Enum):
    """The specification category a verification instance targets."""

    REACH_SAFETY = "ReachSafety"
    TERMINATION = "Termination"
    MEM_SAFETY = "MemSafety"
    OVERFLOW = "Overflow"

    def encode(self) -> int:
        return _PROPERTY_ORDER.index(self)

    @classmethod
    def from_name(cls, name: str) -> "PropertyKind":
        key = name.strip().replace("_", "").replace("-", "").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValueError(f"unknown property kind: {name!r}")


_PROPERTY_ORDER = (
    PropertyKind.REACH_SAFETY,
    PropertyKind.TERMINATION,
    PropertyKind.MEM_SAFETY,
    PropertyKind.OVERFLOW,
)

NUM_PROPERTIES = len(_PROPERTY_ORDER)


@dataclass(frozen=True)
class TokenVocabulary:
    """Ordered set of AST token kinds; index 0 is the reserved Unknown."""

    kinds: tuple[str, ...]

    def __post_init__(self):
        if not self.kinds or self.kinds[0] != "Unknown":
            raise ValueError("vocabulary line 0 must be 'Unknown'")
        if len(set(self.kinds)) != len(self.kinds):
            raise ValueError("vocabulary kinds must be unique")

    def __len__(self) -> int:
        return len(self.kinds)

    def index_of(self, kind: str) -> int:
        """Index of a kind name; unknown names map to the reserved index 0."""
        return self._index().get(kind, 0)

    def _index(self) -> dict[str, int]:
        cached = _VOCAB_INDEX_CACHE.get(self.kinds)
        if cached is None:
            cached = {k: i for i, k in enumerate(self.kinds)}
            _VOCAB_INDEX_CACHE[self.kinds] = cached
        return cached

    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.kinds).encode("utf-8")).hexdigest()

    def to_manifest(self) -> str:
        return "\n".join(self.kinds) + "\n"

    @classmethod
    def from_manifest(cls, text: str) -> "TokenVocabulary":
        kinds = tuple(line.strip() for line in text.splitlines() if line.strip())
        return cls(kinds)

    @classmethod
    def load(cls, path: str | Path) -> "TokenVocabulary":
        return cls.from_manifest(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def default(cls) -> "TokenVocabulary":
        return cls(DEFAULT_KINDS)


_VOCAB_INDEX_CACHE: dict[tuple[str, ...], dict[str, int]] = {}


def encode_onehot(kind_index: int, vocab: TokenVocabulary) -> np.ndarray:
    """One-hot vector of length |T| with the single 1 at ``kind_index``."""
    size = len(vocab)
    if not 0 <= kind_index < size:
        raise IndexError(f"kind index {kind_index} out of range for |T|={size}")
    vec = np.zeros(size)
    vec[kind_index] = 1.0
    return vec


@dataclass
class ProgramGraph:
    """Typed program graph: node kind indices plus three directed edge sets."""

    id: str
    property: PropertyKind
    node_kinds: list[int]
    edge_sets: dict[str, list[tuple[int, int]]]

    @property
    def num_nodes(self) -> int:
        return len(self.node_kinds)

    def num_edges(self) -> int:
        return sum(len(v) for v in self.edge_sets.values())

    def validate(self, vocab_size: int | None = None) -> None:
        n = self.num_nodes
        for name in EDGE_SET_NAMES:
            if name not in self.edge_sets:
                raise SchemaError(f"edges.{name}: missing edge set")
        for name, edges in self.edge_sets.items():
            if name not in EDGE_SET_NAMES:
                raise SchemaError(f"edges.{name}: unknown edge set")
            if len(set(edges)) != len(edges):
                raise SchemaError(f"edges.{name}: duplicate edges")
            for src, dst in edges:
                if not (0 <= src < n and 0 <= dst < n):
                    raise SchemaError(
                        f"edges.{name}: edge endpoint out of range ({src}, {dst})"
                    )
        for idx in self.node_kinds:
            if idx < 0 or (vocab_size is not None and idx >= vocab_size):
                raise SchemaError(f"node_kinds: index {idx} out of range")

    def permuted(self, perm: Sequence[int]) -> "ProgramGraph":
        """Relabel nodes: node i becomes perm[i]. Used by invariance tests."""
        n = self.num_nodes
        kinds = [0] * n
        for old, new in enumerate(perm):
            kinds[new] = self.node_kinds[old]
        edge_sets = {
            name: sorted((perm[s], perm[d]) for s, d in edges)
            for name, edges in self.edge_sets.items()
        }
        return ProgramGraph(self.id, self.property, kinds, edge_sets)


def serialize_graph(graph: ProgramGraph) -> str:
    """Canonical JSON (sorted keys, sorted edges): equal graphs serialize equal."""
    graph.validate()
    payload = {
        "id": graph.id,
        "property": graph.property.value,
        "num_nodes": graph.num_nodes,
        "node_kinds": list(graph.node_kinds),
        "edges": {
            name: sorted([s, d] for s, d in graph.edge_sets.get(name, []))
            for name in EDGE_SET_NAMES
        },
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ": "), indent=1) + "\n"


def _expect(obj: dict, key: str, types) -> object:
    if key not in obj:
        raise SchemaError(f"{key}: missing field")
    value = obj[key]
    if not isinstance(value, types):
        raise SchemaError(f"{key}: expected {types}, got {type(value).__name__}")
    return value


def deserialize_graph(text: str) -> ProgramGraph:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as err:
        raise SchemaError(f"document: not valid JSON ({err})") from err
    if not isinstance(obj, dict):
        raise SchemaError("document: expected a JSON object")
    graph_id = _expect(obj, "id", str)
    prop_name = _expect(obj, "property", str)
    try:
        prop = PropertyKind.from_name(prop_name)
    except ValueError as err:
        raise SchemaError(f"property: {err}") from err
    num_nodes = _expect(obj, "num_nodes", int)
    node_kinds = _expect(obj, "node_kinds", list)
    if len(node_kinds) != num_nodes:
        raise SchemaError("num_nodes: does not match len(node_kinds)")
    if not all(isinstance(k, int) and not isinstance(k, bool) for k in node_kinds):
        raise SchemaError("node_kinds: entries must be integers")
    edges_obj = _expect(obj, "edges", dict)
    edge_sets: dict[str, list[tuple[int, int]]] = {}
    for name in EDGE_SET_NAMES:
        raw = _expect(edges_obj, name, list)
        pairs: list[tuple[int, int]] = []
        for item in raw:
            if (
                not isinstance(item, list)
                or len(item) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in item)
            ):
                raise SchemaError(f"edges.{name}: edges must be [src, dst] int pairs")
            pairs.append((item[0], item[1]))
        edge_sets[name] = pairs
    graph = ProgramGraph(graph_id, prop, list(node_kinds), edge_sets)
    graph.validate()
    return graph


def load_graph(path: str | Path) -> ProgramGraph:
    return deserialize_graph(Path(path).read_text(encoding="utf-8"))


def save_graph(graph: ProgramGraph, path: str | Path) -> None:
    Path(path).write_text(serialize_graph(graph), encoding="utf-8")


# ---------------------------------------------------------------------------
# labels


OUTCOMES = ("correct", "incorrect", "unknown")


@dataclass(frozen=True)
class VerifierLabelRecord:
    """One verifier's result on one (program, property) instance."""

    program_id: str
    property: PropertyKind
    verifier: str
    svcomp_score: float
    cpu_seconds: float
    outcome: str
    label: float | None = None  # precomputed label, bypasses compute_label

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"outcome must be one of {OUTCOMES}: {self.outcome!r}")
        if self.cpu_seconds < 0:
            raise ValueError("cpu_seconds must be >= 0")


def compute_label(
    record: VerifierLabelRecord, time_limit: float, penalty_weight: float
) -> float:
    """Competition score minus a linear penalty for capped normalized time."""
    if time_limit <= 0:
        raise ValueError("time_limit must be positive")
    capped = min(record.cpu_seconds, time_limit)
    return record.svcomp_score - penalty_weight * capped / time_limit


LABELS_HEADER = ("program_id", "property", "verifier", "svcomp_score",
                 "cpu_seconds", "outcome")


def read_labels_csv(text: str) -> list[VerifierLabelRecord]:
    reader = csv.DictReader(io.StringIO(text))
    names = tuple(reader.fieldnames or ())
    if names[: len(LABELS_HEADER)] != LABELS_HEADER or names not in (
        LABELS_HEADER,
        LABELS_HEADER + ("label",),
    ):
        raise SchemaError(f"header: expected {','.join(LABELS_HEADER)}[,label]")
    records = []
    seen: set[tuple[str, PropertyKind, str]] = set()
    for lineno, row in enumerate(reader, start=2):
        try:
            prop = PropertyKind.from_name(row["property"])
            raw_label = (row.get("label") or "").strip()
            record = VerifierLabelRecord(
                program_id=row["program_id"],
                property=prop,
                verifier=row["verifier"],
                svcomp_score=float(row["svcomp_score"]),
                cpu_seconds=float(row["cpu_seconds"]),
                outcome=row["outcome"].strip(),
                label=float(raw_label) if raw_label else None,
            )
        except (ValueError, TypeError) as err:
            raise SchemaError(f"line {lineno}: {err}") from err
        key = (record.program_id, record.property, record.verifier)
        if key in seen:
            raise SchemaError(f"line {lineno}: duplicate record for {key}")
        seen.add(key)
        records.append(record)
    return records


def load_labels(path: str | Path) -> list[VerifierLabelRecord]:
    return read_labels_csv(Path(path).read_text(encoding="utf-8"))


@dataclass
class LabeledInstance:
    """A program graph plus one real-valued label per portfolio verifier."""

    graph: ProgramGraph
    labels: list[float]
    successes: list[bool] = field(default_factory=list)

    @property
    def key(self) -> tuple[str, str]:
        return (self.graph.id, self.graph.property.value)


def build_instances(
    graphs: Iterable[ProgramGraph],
    records: Iterable[VerifierLabelRecord],
    portfolio: Sequence[str],
    *,
    time_limit: float = 900.0,
    penalty_weight: float = 1.0,
) -> list[LabeledInstance]:
    """Join graphs with label records into training instances.

    Every (graph, verifier) pair must have a record; a precomputed ``label``
    column wins over the score/time formula.
    """
    if not portfolio:
        raise ValueError("portfolio must be nonempty")
    by_key: dict[tuple[str, PropertyKind, str], VerifierLabelRecord] = {}
    for rec in records:
        by_key[(rec.program_id, rec.property, rec.verifier)] = rec
    instances = []
    for graph in graphs:
        labels, successes = [], []
        for verifier in portfolio:
            rec = by_key.get((graph.id, graph.property, verifier))
            if rec is None:
                raise KeyError(
                    f"no label record for ({graph.id}, {graph.property.value}, "
                    f"{verifier})"
                )
            value = rec.label if rec.label is not None else compute_label(
                rec, time_limit, penalty_weight
            )
            labels.append(value)
            successes.append(rec.outcome == "correct")
        instances.append(LabeledInstance(graph, labels, successes))
    return instances


# ---------------------------------------------------------------------------
# dataset splitting


def _largest_remainder(total: int, ratios: Sequence[float]) -> list[int]:
    quotas = [total * r for r in ratios]
    sizes = [math.floor(q) for q in quotas]
    leftover = total - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:leftover]:
        sizes[i] += 1
    return sizes


def split_dataset(
    instances: Sequence[LabeledInstance],
    ratios: tuple[float, float, float],
    seed: int,
) -> tuple[list[LabeledInstance], list[LabeledInstance], list[LabeledInstance]]:
    """Stratified (per property) deterministic split into train/val/test."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    rng = random.Random(seed)
    strata: dict[str, list[LabeledInstance]] = {}
    for inst in instances:
        strata.setdefault(inst.graph.property.value, []).append(inst)
    splits: tuple[list, list, list] = ([], [], [])
    for prop_name in sorted(strata):
        group = sorted(strata[prop_name], key=lambda inst: inst.graph.id)
        if len(group) < 3:
            warnings.warn(
                f"property {prop_name} has only {len(group)} instance(s)",
                EmptyStratumWarning,
                stacklevel=2,
            )
        rng.shuffle(group)
        sizes = _largest_remainder(len(group), ratios)
        start = 0
        for part, size in zip(splits, sizes):
            part.extend(group[start:start + size])
            start += size
    return splits
