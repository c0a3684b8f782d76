"""Graph attention ranker: GAT layers, jumping knowledge, attention pooling,
and the verifier-scoring head.

Message passing runs over the union of the enabled edge sets plus an implicit
self-loop per node. For an edge (j -> i) the unnormalized attention score is
``leaky_relu(attn . [W_in h_i || W_out h_j])``; scores are softmax-normalized
over each node's incoming edges and weight the messages ``W_out h_j``. All of
it is expressed with the autodiff primitives, so one forward pass serves
inference, training, and the edge-mask explainer (which supplies a
multiplicative mask over the attention matrix).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tensor as tz
from .graphio import NUM_PROPERTIES, ProgramGraph, PropertyKind, TokenVocabulary
from .tensor import Tensor

EDGE_SET_CHOICES = ("AST", "ICFG", "DFG")
MODEL_FORMAT_VERSION = 1
_MASKED = -1e30  # additive mask for non-edges inside the softmax


class VocabMismatch(Exception):
    """Graph and model disagree about the token vocabulary."""


class EmptyGraph(Exception):
    """The model needs at least one node."""


class LengthMismatch(Exception):
    """Paired vectors have different lengths (or are too short)."""


class ModelFormatError(Exception):
    """A model container could not be decoded."""


@dataclass(frozen=True)
class ModelConfig:
    num_gat_layers: int = 1
    edge_sets: tuple[str, ...] = ("AST", "ICFG", "DFG")
    jumping_knowledge: bool = True
    gat_width: int = 32
    pool_hidden: tuple[int, int] = (64, 12)
    head_hidden: tuple[int, int] | None = None  # None: (d_in, d_in // 2)
    property_encoding: str = "scalar"  # scalar | onehot
    leaky_slope: float = 0.2

    def __post_init__(self):
        if not 0 <= self.num_gat_layers <= 5:
            raise ValueError("num_gat_layers must be in 0..5")
        bad = set(self.edge_sets) - set(EDGE_SET_CHOICES)
        if bad:
            raise ValueError(f"unknown edge sets: {sorted(bad)}")
        if len(set(self.edge_sets)) != len(self.edge_sets):
            raise ValueError("edge_sets must not repeat")
        if self.property_encoding not in ("scalar", "onehot"):
            raise ValueError("property_encoding must be 'scalar' or 'onehot'")
        if self.gat_width < 1 or any(w < 1 for w in self.pool_hidden):
            raise ValueError("widths must be positive")

    @property
    def property_dim(self) -> int:
        return 1 if self.property_encoding == "scalar" else NUM_PROPERTIES

    def node_dim(self, vocab_size: int) -> int:
        """Width of the pooled node states (after jumping knowledge)."""
        if self.num_gat_layers == 0:
            return vocab_size
        if self.jumping_knowledge:
            return vocab_size + self.num_gat_layers * self.gat_width
        return self.gat_width

    def to_dict(self) -> dict:
        return {
            "num_gat_layers": self.num_gat_layers,
            "edge_sets": list(self.edge_sets),
            "jumping_knowledge": self.jumping_knowledge,
            "gat_width": self.gat_width,
            "pool_hidden": list(self.pool_hidden),
            "head_hidden": list(self.head_hidden) if self.head_hidden else None,
            "property_encoding": self.property_encoding,
            "leaky_slope": self.leaky_slope,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        kwargs = dict(data)
        kwargs["edge_sets"] = tuple(kwargs.get("edge_sets", EDGE_SET_CHOICES))
        kwargs["pool_hidden"] = tuple(kwargs.get("pool_hidden", (64, 12)))
        if kwargs.get("head_hidden") is not None:
            kwargs["head_hidden"] = tuple(kwargs["head_hidden"])
        return cls(**kwargs)


@dataclass
class GatLayerParams:
    w_in: Tensor   # (d_out, d_in), attention transform of the receiver
    w_out: Tensor  # (d_out, d_in), sender transform carried by messages
    attn: Tensor   # (2 * d_out, 1)


@dataclass
class AffineParams:
    w: Tensor  # (out, in)
    b: Tensor  # (1, out)


@dataclass
class ModelParameters:
    config: ModelConfig
    portfolio: tuple[str, ...]
    vocab_fingerprint: str
    vocab_size: int
    gat: list[GatLayerParams]
    pool: list[AffineParams]
    head: list[AffineParams]

    def named(self) -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        for i, layer in enumerate(self.gat):
            out += [(f"gat{i}.w_in", layer.w_in), (f"gat{i}.w_out", layer.w_out),
                    (f"gat{i}.attn", layer.attn)]
        for i, layer in enumerate(self.pool):
            out += [(f"pool{i}.w", layer.w), (f"pool{i}.b", layer.b)]
        for i, layer in enumerate(self.head):
            out += [(f"head{i}.w", layer.w), (f"head{i}.b", layer.b)]
        return out

    def trainables(self) -> list[Tensor]:
        return [t for _, t in self.named()]

    def zero_grad(self) -> None:
        for t in self.trainables():
            t.zero_grad()

    def copy(self) -> "ModelParameters":
        def dup_affine(layer: AffineParams) -> AffineParams:
            return AffineParams(
                Tensor(layer.w.values.copy(), requires_grad=True),
                Tensor(layer.b.values.copy(), requires_grad=True),
            )

        return ModelParameters(
            config=self.config,
            portfolio=self.portfolio,
            vocab_fingerprint=self.vocab_fingerprint,
            vocab_size=self.vocab_size,
            gat=[
                GatLayerParams(
                    Tensor(g.w_in.values.copy(), requires_grad=True),
                    Tensor(g.w_out.values.copy(), requires_grad=True),
                    Tensor(g.attn.values.copy(), requires_grad=True),
                )
                for g in self.gat
            ],
            pool=[dup_affine(p) for p in self.pool],
            head=[dup_affine(h) for h in self.head],
        )


@dataclass(frozen=True)
class RankingResult:
    """Per-verifier scores and the induced ordering for one instance."""

    graph_id: str
    scores: tuple[float, ...]
    ordering: tuple[int, ...]  # verifier indices, best first


def init_parameters(
    config: ModelConfig,
    vocab: TokenVocabulary,
    portfolio: Sequence[str],
    seed: int = 0,
) -> ModelParameters:
    """Fresh parameters, uniform in +-1/sqrt(fan_in) from a seeded generator."""
    if not portfolio:
        raise ValueError("portfolio must be nonempty")
    rng = np.random.default_rng(seed)
    vocab_size = len(vocab)

    def uniform(rows: int, cols: int, fan_in: int) -> Tensor:
        bound = 1.0 / np.sqrt(fan_in)
        return Tensor(rng.uniform(-bound, bound, size=(rows, cols)),
                      requires_grad=True)

    gat = []
    d_in = vocab_size
    for _ in range(config.num_gat_layers):
        d_out = config.gat_width
        gat.append(GatLayerParams(
            w_in=uniform(d_out, d_in, d_in),
            w_out=uniform(d_out, d_in, d_in),
            attn=uniform(2 * d_out, 1, 2 * d_out),
        ))
        d_in = d_out

    def affine(dims: Sequence[int]) -> list[AffineParams]:
        layers = []
        for a, b in zip(dims, dims[1:]):
            layers.append(AffineParams(w=uniform(b, a, a),
                                       b=uniform(1, b, a)))
        return layers

    node_dim = config.node_dim(vocab_size)
    pool = affine([node_dim, *config.pool_hidden, 1])
    head_in = node_dim + config.property_dim
    hidden = config.head_hidden or (head_in, max(1, head_in // 2))
    head = affine([head_in, *hidden, len(portfolio)])
    return ModelParameters(
        config=config,
        portfolio=tuple(portfolio),
        vocab_fingerprint=vocab.fingerprint(),
        vocab_size=vocab_size,
        gat=gat,
        pool=pool,
        head=head,
    )


# ---------------------------------------------------------------------------
# forward pass


def union_edges(graph: ProgramGraph, edge_sets: Sequence[str]) -> list[tuple[int, int]]:
    """Deduplicated union of the enabled edge sets, sorted for determinism."""
    merged: set[tuple[int, int]] = set()
    for name in edge_sets:
        merged.update(graph.edge_sets.get(name, []))
    return sorted(merged)


def _allowed_mask(n: int, edges: Sequence[tuple[int, int]]) -> np.ndarray:
    """Additive softmax mask: 0 on self-loops and edges (row=dst), else -inf-ish."""
    mask = np.full((n, n), _MASKED)
    np.fill_diagonal(mask, 0.0)
    for src, dst in edges:
        mask[dst, src] = 0.0
    return mask


def gat_layer(
    states: Tensor,
    edges: Sequence[tuple[int, int]],
    params: GatLayerParams,
    *,
    slope: float = 0.2,
    message_mask: Tensor | None = None,
    allowed_mask: np.ndarray | None = None,
) -> Tensor:
    """One attention layer over the given edges plus implicit self-loops."""
    n = states.shape[0]
    d_out = params.w_in.shape[0]
    if params.w_in.shape[1] != states.shape[1]:
        raise tz.ShapeError(
            f"gat_layer: states width {states.shape[1]} vs W_in {params.w_in.shape}"
        )
    xin = tz.matmul(states, tz.transpose(params.w_in))    # receiver features
    xout = tz.matmul(states, tz.transpose(params.w_out))  # sender features
    a_in = tz.slice_rows(params.attn, 0, d_out)
    a_out = tz.slice_rows(params.attn, d_out, 2 * d_out)
    s_in = tz.matmul(xin, a_in)    # (n, 1)
    s_out = tz.matmul(xout, a_out)  # (n, 1)
    ones_row = tz.constant(np.ones((1, n)))
    ones_col = tz.constant(np.ones((n, 1)))
    # score[i, j] = s_in[i] + s_out[j] for the edge (j -> i)
    raw = tz.add(tz.matmul(s_in, ones_row), tz.matmul(ones_col, tz.transpose(s_out)))
    raw = tz.leaky_relu(raw, slope)
    if allowed_mask is None:
        allowed_mask = _allowed_mask(n, edges)
    attn = tz.softmax_rows(tz.add(raw, tz.constant(allowed_mask)))
    if message_mask is not None:
        attn = tz.elementwise_mul(attn, message_mask)
    return tz.matmul(attn, xout)


def jumping_knowledge(layer_outputs: Sequence[Tensor], enabled: bool = True) -> Tensor:
    """Concatenate per-layer node states column-wise (or keep the last)."""
    if not layer_outputs:
        raise tz.ShapeError("jumping_knowledge: no layer outputs")
    rows = layer_outputs[0].shape[0]
    if any(t.shape[0] != rows for t in layer_outputs):
        raise tz.ShapeError(
            f"jumping_knowledge: node counts differ "
            f"{[t.shape for t in layer_outputs]}"
        )
    if not enabled or len(layer_outputs) == 1:
        return layer_outputs[-1]
    return tz.concat_cols(list(layer_outputs))


def pool_weights(states: Tensor, pool: Sequence[AffineParams],
                 slope: float = 0.2) -> Tensor:
    """Softmax-normalized per-node pooling weights, shape (1, n)."""
    if states.shape[0] < 1:
        raise EmptyGraph("attention pooling needs at least one node")
    z = states
    for i, layer in enumerate(pool):
        z = tz.add(tz.matmul(z, tz.transpose(layer.w)), layer.b)
        if i + 1 < len(pool):
            z = tz.leaky_relu(z, slope)
    return tz.softmax_rows(tz.transpose(z))


def attention_pool(states: Tensor, pool: Sequence[AffineParams],
                   slope: float = 0.2) -> Tensor:
    """Collapse node states into one graph vector via learned softmax weights."""
    return tz.matmul(pool_weights(states, pool, slope), states)


def _encode_property(prop: PropertyKind, config: ModelConfig) -> Tensor:
    if config.property_encoding == "scalar":
        return tz.constant([[float(prop.encode())]])
    row = np.zeros((1, NUM_PROPERTIES))
    row[0, prop.encode()] = 1.0
    return tz.constant(row)


def forward_scores(
    graph: ProgramGraph,
    params: ModelParameters,
    *,
    prop: PropertyKind | None = None,
    message_mask: Tensor | None = None,
) -> Tensor:
    """Score vector (1, portfolio size) as a differentiable tensor."""
    n = graph.num_nodes
    if n == 0:
        raise EmptyGraph(f"graph {graph.id} has no nodes")
    if any(k < 0 or k >= params.vocab_size for k in graph.node_kinds):
        raise VocabMismatch(
            f"graph {graph.id} has kind indices outside |T|={params.vocab_size}"
        )
    config = params.config
    onehot = np.zeros((n, params.vocab_size))
    onehot[np.arange(n), graph.node_kinds] = 1.0
    states = tz.constant(onehot)

    edges = union_edges(graph, config.edge_sets)
    allowed = _allowed_mask(n, edges) if config.num_gat_layers else None
    outputs = [states]
    for layer in params.gat:
        outputs.append(gat_layer(
            outputs[-1], edges, layer,
            slope=config.leaky_slope,
            message_mask=message_mask,
            allowed_mask=allowed,
        ))
    collected = jumping_knowledge(outputs, config.jumping_knowledge)
    graph_vec = attention_pool(collected, params.pool, config.leaky_slope)
    prop_vec = _encode_property(prop or graph.property, config)
    z = tz.concat_cols([graph_vec, prop_vec])
    for i, layer in enumerate(params.head):
        z = tz.add(tz.matmul(z, tz.transpose(layer.w)), layer.b)
        if i + 1 < len(params.head):
            z = tz.leaky_relu(z, config.leaky_slope)
    return z


def ordering_from_scores(scores: Sequence[float]) -> tuple[int, ...]:
    """Indices sorted by descending score; ties broken by ascending index."""
    return tuple(sorted(range(len(scores)), key=lambda i: (-scores[i], i)))


def predict(
    graph: ProgramGraph,
    params: ModelParameters,
    *,
    prop: PropertyKind | None = None,
    vocab: TokenVocabulary | None = None,
) -> RankingResult:
    """Rank the portfolio for one graph (inference only, no gradients)."""
    if vocab is not None and vocab.fingerprint() != params.vocab_fingerprint:
        raise VocabMismatch("vocabulary fingerprint differs from the model's")
    with tz.no_grad():
        scores = forward_scores(graph, params, prop=prop)
    flat = tuple(float(v) for v in scores.values[0])
    return RankingResult(graph.id, flat, ordering_from_scores(flat))


# ---------------------------------------------------------------------------
# pairwise margin ranking loss


def _ranking_pairs(labels: Sequence[float]) -> list[tuple[int, int]]:
    k = len(labels)
    return [(a, b) for a in range(k) for b in range(k) if labels[a] > labels[b]]


def margin_rank_loss_t(scores: Tensor, labels: Sequence[float],
                       margin: float = 1.0) -> Tensor:
    """Mean hinge over ordered pairs; differentiable in ``scores``."""
    k = scores.shape[1]
    if scores.shape[0] != 1 or k != len(labels) or k < 2:
        raise LengthMismatch(
            f"scores {scores.shape} vs {len(labels)} labels (need >= 2)"
        )
    pairs = _ranking_pairs(labels)
    if not pairs:
        return tz.constant([[0.0]])
    diff = np.zeros((k, len(pairs)))
    for col, (a, b) in enumerate(pairs):
        diff[a, col] = 1.0
        diff[b, col] = -1.0
    separations = tz.matmul(scores, tz.constant(diff))
    hinge = tz.relu(tz.add(tz.scalar_mul(separations, -1.0),
                           tz.constant([[float(margin)]])))
    return tz.mean_all(hinge)


def margin_rank_loss(scores: Sequence[float], labels: Sequence[float],
                     margin: float = 1.0) -> float:
    """Float convenience wrapper over :func:`margin_rank_loss_t`."""
    if len(scores) != len(labels) or len(scores) < 2:
        raise LengthMismatch(
            f"{len(scores)} scores vs {len(labels)} labels (need >= 2)"
        )
    with tz.no_grad():
        return margin_rank_loss_t(tz.constant(list(scores)), labels, margin).item()


# ---------------------------------------------------------------------------
# model container (binary, versioned)


def save_model(params: ModelParameters, path: str | Path) -> None:
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "config": params.config.to_dict(),
        "portfolio": list(params.portfolio),
        "vocab_fingerprint": params.vocab_fingerprint,
        "vocab_size": params.vocab_size,
    }
    chunks = [json.dumps(header, sort_keys=True).encode("utf-8"), b"\n"]
    for name, t in params.named():
        blob = name.encode("utf-8")
        rows, cols = t.shape
        chunks.append(struct.pack("<I", len(blob)))
        chunks.append(blob)
        chunks.append(struct.pack("<II", rows, cols))
        chunks.append(np.ascontiguousarray(t.values, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_model(path: str | Path) -> ModelParameters:
    data = Path(path).read_bytes()
    newline = data.find(b"\n")
    if newline < 0:
        raise ModelFormatError("missing header line")
    try:
        header = json.loads(data[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise ModelFormatError(f"bad header: {err}") from err
    version = header.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version: {version!r}")
    try:
        config = ModelConfig.from_dict(header["config"])
        portfolio = tuple(header["portfolio"])
        fingerprint = header["vocab_fingerprint"]
        vocab_size = int(header["vocab_size"])
    except (KeyError, TypeError, ValueError) as err:
        raise ModelFormatError(f"bad header: {err}") from err

    blocks: dict[str, np.ndarray] = {}
    offset = newline + 1
    while offset < len(data):
        try:
            (name_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            name = data[offset:offset + name_len].decode("utf-8")
            offset += name_len
            rows, cols = struct.unpack_from("<II", data, offset)
            offset += 8
            count = rows * cols
            values = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
            offset += count * 8
        except (struct.error, ValueError, UnicodeDecodeError) as err:
            raise ModelFormatError(f"corrupt parameter block: {err}") from err
        blocks[name] = values.reshape(rows, cols).astype(np.float64)

    def take(name: str) -> Tensor:
        if name not in blocks:
            raise ModelFormatError(f"missing parameter block: {name}")
        return Tensor(blocks.pop(name), requires_grad=True)

    gat = [
        GatLayerParams(take(f"gat{i}.w_in"), take(f"gat{i}.w_out"),
                       take(f"gat{i}.attn"))
        for i in range(config.num_gat_layers)
    ]
    pool = [AffineParams(take(f"pool{i}.w"), take(f"pool{i}.b")) for i in range(3)]
    head = [AffineParams(take(f"head{i}.w"), take(f"head{i}.b")) for i in range(3)]
    if blocks:
        raise ModelFormatError(f"unexpected parameter blocks: {sorted(blocks)}")
    return ModelParameters(
        config=config,
        portfolio=portfolio,
        vocab_fingerprint=fingerprint,
        vocab_size=vocab_size,
        gat=gat,
        pool=pool,
        head=head,
    )
