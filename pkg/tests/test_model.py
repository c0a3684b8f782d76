import numpy as np
import pytest

from helpers import random_graph, random_permutation
from verisel import tensor as T
from verisel.graphio import ProgramGraph, PropertyKind, TokenVocabulary
from verisel.model import (
    AffineParams,
    EmptyGraph,
    GatLayerParams,
    LengthMismatch,
    ModelConfig,
    ModelFormatError,
    VocabMismatch,
    attention_pool,
    forward_scores,
    gat_layer,
    init_parameters,
    jumping_knowledge,
    load_model,
    margin_rank_loss,
    margin_rank_loss_t,
    pool_weights,
    predict,
    save_model,
)

VOCAB8 = TokenVocabulary(("Unknown",) + tuple(f"K{i}" for i in range(1, 8)))
PORTFOLIO = ("alpha", "beta", "gamma")


def tiny_params(seed=0, **config_kwargs):
    defaults = dict(num_gat_layers=1, gat_width=4, pool_hidden=(5, 3))
    defaults.update(config_kwargs)
    return init_parameters(ModelConfig(**defaults), VOCAB8, PORTFOLIO, seed=seed)


def graph_of(kinds, ast=(), icfg=(), dfg=(), prop=PropertyKind.REACH_SAFETY):
    return ProgramGraph("g", prop, list(kinds), {
        "AST": sorted(ast), "ICFG": sorted(icfg), "DFG": sorted(dfg),
    })


# ---------------------------------------------------------------------------
# gat_layer


def identity_layer(d):
    attn = np.zeros((2 * d, 1))
    attn[0, 0] = 0.3  # arbitrary, irrelevant over a lone self-loop
    return GatLayerParams(
        w_in=T.Tensor(np.eye(d), requires_grad=True),
        w_out=T.Tensor(np.eye(d), requires_grad=True),
        attn=T.Tensor(attn, requires_grad=True),
    )


def test_gat_single_node_identity():
    h = T.constant([[1.0, -2.0, 0.5]])
    out = gat_layer(h, [], identity_layer(3))
    np.testing.assert_allclose(out.values, h.values, atol=1e-12)


def test_gat_disconnected_nodes_independent_and_equivariant():
    rng = np.random.default_rng(0)
    params = GatLayerParams(
        w_in=T.Tensor(rng.standard_normal((4, 3))),
        w_out=T.Tensor(rng.standard_normal((4, 3))),
        attn=T.Tensor(rng.standard_normal((8, 1))),
    )
    h = T.constant(rng.standard_normal((2, 3)))
    out = gat_layer(h, [], params)
    swapped = gat_layer(T.constant(h.values[::-1].copy()), [], params)
    np.testing.assert_allclose(out.values, swapped.values[::-1], atol=1e-12)


def dense_gat_oracle(h, edges, params, slope=0.2):
    """Per-node recomputation with explicit neighbor lists."""
    n, _ = h.shape
    w_in, w_out, attn = params.w_in.values, params.w_out.values, params.attn.values
    d = w_in.shape[0]
    a_in, a_out = attn[:d, 0], attn[d:, 0]
    xin = h @ w_in.T
    xout = h @ w_out.T
    out = np.zeros((n, d))
    for i in range(n):
        senders = sorted({j for (j, dst) in edges if dst == i} | {i})
        raw = np.array([a_in @ xin[i] + a_out @ xout[j] for j in senders])
        raw = np.where(raw >= 0, raw, slope * raw)
        weights = np.exp(raw - raw.max())
        weights /= weights.sum()
        for weight, j in zip(weights, senders):
            out[i] += weight * xout[j]
    return out


def test_gat_path_graph_matches_dense_oracle():
    rng = np.random.default_rng(7)
    params = GatLayerParams(
        w_in=T.Tensor(rng.standard_normal((4, 5))),
        w_out=T.Tensor(rng.standard_normal((4, 5))),
        attn=T.Tensor(rng.standard_normal((8, 1))),
    )
    h = rng.standard_normal((3, 5))
    edges = [(0, 1), (1, 2)]
    got = gat_layer(T.constant(h), edges, params).values
    np.testing.assert_allclose(got, dense_gat_oracle(h, edges, params), atol=1e-10)


def test_gat_random_graphs_match_dense_oracle():
    rng = np.random.default_rng(21)
    for _ in range(20):
        n = int(rng.integers(1, 7))
        d_in = int(rng.integers(1, 5))
        d_out = int(rng.integers(1, 5))
        params = GatLayerParams(
            w_in=T.Tensor(rng.standard_normal((d_out, d_in))),
            w_out=T.Tensor(rng.standard_normal((d_out, d_in))),
            attn=T.Tensor(rng.standard_normal((2 * d_out, 1))),
        )
        edges = sorted({
            (int(rng.integers(0, n)), int(rng.integers(0, n)))
            for _ in range(int(rng.integers(0, 2 * n)))
        })
        h = rng.standard_normal((n, d_in))
        got = gat_layer(T.constant(h), edges, params).values
        np.testing.assert_allclose(
            got, dense_gat_oracle(h, edges, params), atol=1e-10
        )


# ---------------------------------------------------------------------------
# jumping knowledge


def test_jumping_knowledge_single_matrix_identity():
    a = T.constant(np.arange(6.0).reshape(3, 2))
    out = jumping_knowledge([a])
    np.testing.assert_array_equal(out.values, a.values)


def test_jumping_knowledge_concat_order():
    a = T.constant(np.ones((2, 2)))
    b = T.constant(2.0 * np.ones((2, 3)))
    out = jumping_knowledge([a, b])
    assert out.shape == (2, 5)
    np.testing.assert_array_equal(out.values[:, :2], a.values)
    np.testing.assert_array_equal(out.values[:, 2:], b.values)


def test_jumping_knowledge_disabled_returns_last():
    a = T.constant(np.ones((2, 2)))
    b = T.constant(2.0 * np.ones((2, 3)))
    out = jumping_knowledge([a, b], enabled=False)
    np.testing.assert_array_equal(out.values, b.values)


def test_zero_gat_layers_pool_over_onehot():
    params = tiny_params(num_gat_layers=0)
    kinds = [1, 3, 5]
    graph = graph_of(kinds, ast=[(0, 1), (0, 2)])
    with T.no_grad():
        scores = forward_scores(graph, params)
    assert scores.shape == (1, len(PORTFOLIO))


# ---------------------------------------------------------------------------
# attention pooling


def test_pool_single_node_identity():
    rng = np.random.default_rng(3)
    params = tiny_params()
    v = rng.standard_normal((1, 5))
    states = T.constant(v)
    pool = [
        AffineParams(T.Tensor(rng.standard_normal((4, 5))), T.Tensor(np.zeros((1, 4)))),
        AffineParams(T.Tensor(rng.standard_normal((2, 4))), T.Tensor(np.zeros((1, 2)))),
        AffineParams(T.Tensor(rng.standard_normal((1, 2))), T.Tensor(np.zeros((1, 1)))),
    ]
    out = attention_pool(states, pool)
    np.testing.assert_allclose(out.values, v, atol=1e-12)


def test_pool_two_identical_nodes():
    rng = np.random.default_rng(4)
    v = rng.standard_normal(5)
    states = T.constant(np.stack([v, v]))
    pool = [
        AffineParams(T.Tensor(rng.standard_normal((3, 5))), T.Tensor(np.zeros((1, 3)))),
        AffineParams(T.Tensor(rng.standard_normal((2, 3))), T.Tensor(np.zeros((1, 2)))),
        AffineParams(T.Tensor(rng.standard_normal((1, 2))), T.Tensor(np.zeros((1, 1)))),
    ]
    out = attention_pool(states, pool)
    np.testing.assert_allclose(out.values[0], v, atol=1e-12)


def test_pool_weights_are_probabilities():
    rng = np.random.default_rng(5)
    pool = [
        AffineParams(T.Tensor(rng.standard_normal((3, 4))), T.Tensor(rng.standard_normal((1, 3)))),
        AffineParams(T.Tensor(rng.standard_normal((2, 3))), T.Tensor(rng.standard_normal((1, 2)))),
        AffineParams(T.Tensor(rng.standard_normal((1, 2))), T.Tensor(rng.standard_normal((1, 1)))),
    ]
    states = T.constant(rng.standard_normal((6, 4)))
    weights = pool_weights(states, pool).values
    assert weights.min() >= 0.0
    np.testing.assert_allclose(weights.sum(), 1.0, atol=1e-12)


def test_pool_permutation_invariance():
    rng = np.random.default_rng(6)
    pool = [
        AffineParams(T.Tensor(rng.standard_normal((3, 4))), T.Tensor(rng.standard_normal((1, 3)))),
        AffineParams(T.Tensor(rng.standard_normal((2, 3))), T.Tensor(rng.standard_normal((1, 2)))),
        AffineParams(T.Tensor(rng.standard_normal((1, 2))), T.Tensor(rng.standard_normal((1, 1)))),
    ]
    states = rng.standard_normal((6, 4))
    base = attention_pool(T.constant(states), pool).values
    shuffled = attention_pool(T.constant(states[rng.permutation(6)]), pool).values
    np.testing.assert_allclose(base, shuffled, atol=1e-9)


def test_pool_empty_graph():
    pool = [AffineParams(T.Tensor(np.ones((1, 2))), T.Tensor(np.zeros((1, 1))))]
    with pytest.raises(EmptyGraph):
        attention_pool(T.Tensor(np.zeros((0, 2))), pool)


# ---------------------------------------------------------------------------
# predict


def test_predict_zero_head_gives_portfolio_order():
    params = tiny_params()
    for layer in params.head:
        layer.w.values[:] = 0.0
        layer.b.values[:] = 0.0
    graph = graph_of([1, 2, 3], ast=[(0, 1), (0, 2)])
    result = predict(graph, params)
    assert result.scores == (0.0, 0.0, 0.0)
    assert result.ordering == (0, 1, 2)


def test_predict_depends_on_property():
    params = tiny_params(seed=11)
    graph = graph_of([1, 2, 3, 4], ast=[(0, 1), (1, 2), (1, 3)])
    one = predict(graph, params, prop=PropertyKind.REACH_SAFETY)
    two = predict(graph, params, prop=PropertyKind.TERMINATION)
    assert one.scores != two.scores


def test_predict_permutation_invariance():
    rng = np.random.default_rng(13)
    params = tiny_params(seed=5, num_gat_layers=2)
    for _ in range(10):
        graph = random_graph(rng, max_nodes=9, vocab_size=len(VOCAB8))
        perm = random_permutation(rng, graph.num_nodes)
        base = predict(graph, params)
        shuffled = predict(graph.permuted(perm), params)
        np.testing.assert_allclose(base.scores, shuffled.scores, atol=1e-9)


def test_predict_vocab_mismatch():
    params = tiny_params()
    graph = graph_of([len(VOCAB8)])  # kind index out of range
    with pytest.raises(VocabMismatch):
        predict(graph, params)
    other_vocab = TokenVocabulary(("Unknown", "Different"))
    with pytest.raises(VocabMismatch):
        predict(graph_of([1]), params, vocab=other_vocab)


def test_predict_without_edges_sees_only_kind_multiset():
    params = tiny_params(seed=3, edge_sets=())
    chain = graph_of([1, 2, 3, 4], icfg=[(0, 1), (1, 2), (2, 3)])
    star = graph_of([4, 2, 1, 3], ast=[(0, 1), (0, 2), (0, 3)])
    np.testing.assert_allclose(
        predict(chain, params).scores, predict(star, params).scores, atol=1e-9
    )


def test_predict_tie_break_by_index():
    params = tiny_params()
    for layer in params.head:
        layer.w.values[:] = 0.0
        layer.b.values[:] = 0.0
    params.head[-1].b.values[0] = [1.0, 5.0, 5.0]
    result = predict(graph_of([1, 2]), params)
    assert result.ordering == (1, 2, 0)


# ---------------------------------------------------------------------------
# margin ranking loss


def test_margin_loss_separated_pair_is_zero():
    assert margin_rank_loss([10.0, 0.0], [1.0, 0.0], margin=1.0) == 0.0


def test_margin_loss_tied_scores_pay_the_margin():
    assert margin_rank_loss([0.0, 0.0], [1.0, 0.0], margin=1.0) == 1.0


def test_margin_loss_matches_bruteforce():
    rng = np.random.default_rng(17)
    for _ in range(50):
        scores = rng.standard_normal(5)
        labels = rng.standard_normal(5)
        margin = float(rng.uniform(0.1, 2.0))
        expected_terms = [
            max(0.0, margin - (scores[a] - scores[b]))
            for a in range(5) for b in range(5) if labels[a] > labels[b]
        ]
        expected = float(np.mean(expected_terms)) if expected_terms else 0.0
        got = margin_rank_loss(list(scores), list(labels), margin)
        assert abs(got - expected) < 1e-12


def test_margin_loss_length_mismatch():
    with pytest.raises(LengthMismatch):
        margin_rank_loss([1.0, 2.0], [1.0], margin=1.0)
    with pytest.raises(LengthMismatch):
        margin_rank_loss([1.0], [1.0], margin=1.0)


def test_margin_loss_gradient_direction():
    scores = T.Tensor([[0.0, 0.0]], requires_grad=True)
    loss = margin_rank_loss_t(scores, [1.0, 0.0], margin=1.0)
    T.backward(loss)
    # pushing score 0 up and score 1 down reduces the loss
    assert scores.grad[0, 0] < 0 < scores.grad[0, 1]


# ---------------------------------------------------------------------------
# end-to-end gradients (small spot check; the full grid runs in acceptance)


def test_forward_scores_gradcheck_one_config():
    params = tiny_params(seed=23, num_gat_layers=1, jumping_knowledge=True)
    graph = graph_of([1, 2, 3, 4],
                     ast=[(0, 1), (0, 2), (2, 3)],
                     icfg=[(1, 2), (2, 1)],
                     dfg=[(1, 3)])
    rng = np.random.default_rng(0)
    mix = T.constant(rng.standard_normal((1, len(PORTFOLIO))))

    def loss_fn(*_):
        scores = forward_scores(graph, params)
        return T.sum_all(T.elementwise_mul(scores, mix))

    report = T.grad_check(loss_fn, params.trainables(), step=1e-5, tolerance=1e-4)
    assert report.passed, report


# ---------------------------------------------------------------------------
# serialization


def test_model_container_round_trip_bit_identical(tmp_path):
    params = tiny_params(seed=29, num_gat_layers=2)
    path = tmp_path / "model.bin"
    save_model(params, path)
    again = load_model(path)
    assert again.portfolio == params.portfolio
    assert again.config == params.config
    assert again.vocab_fingerprint == params.vocab_fingerprint
    rng = np.random.default_rng(31)
    for _ in range(5):
        graph = random_graph(rng, max_nodes=8, vocab_size=len(VOCAB8))
        assert predict(graph, params).scores == predict(graph, again).scores


def test_model_container_rejects_unknown_version(tmp_path):
    params = tiny_params()
    path = tmp_path / "model.bin"
    save_model(params, path)
    raw = path.read_bytes()
    header, rest = raw.split(b"\n", 1)
    doctored = header.replace(b'"format_version": 1', b'"format_version": 99')
    path.write_bytes(doctored + b"\n" + rest)
    with pytest.raises(ModelFormatError, match="version"):
        load_model(path)
