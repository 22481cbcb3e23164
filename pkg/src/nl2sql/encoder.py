"""Question encoder with learnable table/column selection tokens.

Two learnable tokens are prepended to the question token states; after the
self-attention stack their output states drive two projection heads that
score the global table and column vocabularies.  The top-k tables gate
which columns are eligible (masked to probability exactly zero otherwise),
the selected ids are embedded through dedicated lookup tables, mean-pooled,
concatenated and projected into a single schema context vector, which is
broadcast-added onto the question states to form the decoder memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import NEG_INF, Tensor
from .params import Initializer, ParamStore


def sinusoid_table(n: int, dim: int) -> np.ndarray:
    """Fixed sinusoidal position encodings, one row per position."""
    pos = np.arange(n)[:, None].astype(np.float64)
    idx = np.arange(dim)[None, :].astype(np.float64)
    angle = pos / np.power(10000.0, 2.0 * np.floor(idx / 2.0) / dim)
    table = np.zeros((n, dim))
    table[:, 0::2] = np.sin(angle[:, 0::2])
    table[:, 1::2] = np.cos(angle[:, 1::2])
    return table


@dataclass
class AttentionLayerParams:
    wq: list[Tensor]  # per head (d, d_k)
    wk: list[Tensor]
    wv: list[Tensor]  # per head (d, d_v)
    wo: Tensor  # (heads * d_v, d)
    w1: Tensor  # (d, d_ff)
    b1: Tensor
    w2: Tensor  # (d_ff, d)
    b2: Tensor
    ln1_g: Tensor
    ln1_b: Tensor
    ln2_g: Tensor
    ln2_b: Tensor


def init_attention_layer(
    store: ParamStore, prefix: str, d: int, heads: int, d_k: int, d_v: int,
    d_ff: int, init: Initializer,
) -> AttentionLayerParams:
    return AttentionLayerParams(
        wq=[store.add(f"{prefix}.h{k}.wq", init.linear(d, d_k)) for k in range(heads)],
        wk=[store.add(f"{prefix}.h{k}.wk", init.linear(d, d_k)) for k in range(heads)],
        wv=[store.add(f"{prefix}.h{k}.wv", init.linear(d, d_v)) for k in range(heads)],
        wo=store.add(f"{prefix}.wo", init.linear(heads * d_v, d)),
        w1=store.add(f"{prefix}.ffn.w1", init.linear(d, d_ff)),
        b1=store.add(f"{prefix}.ffn.b1", init.zeros(d_ff)),
        w2=store.add(f"{prefix}.ffn.w2", init.linear(d_ff, d)),
        b2=store.add(f"{prefix}.ffn.b2", init.zeros(d)),
        ln1_g=store.add(f"{prefix}.ln1.g", init.ones(d)),
        ln1_b=store.add(f"{prefix}.ln1.b", init.zeros(d)),
        ln2_g=store.add(f"{prefix}.ln2.g", init.ones(d)),
        ln2_b=store.add(f"{prefix}.ln2.b", init.zeros(d)),
    )


def multi_head_attention(
    queries: Tensor,
    keys: Tensor,
    layer: AttentionLayerParams,
    mask=None,
    logit_bias: Tensor | None = None,
) -> Tensor:
    """Heads attend `queries` over `keys`; optional additive mask and a
    per-attended-position scalar logit bias shared across rows."""
    d_k = layer.wq[0].shape[1]
    scale = 1.0 / np.sqrt(d_k)
    heads = []
    for k in range(len(layer.wq)):
        q = ad.matmul(queries, layer.wq[k])
        key = ad.matmul(keys, layer.wk[k])
        val = ad.matmul(keys, layer.wv[k])
        logits = ad.scale(ad.matmul(q, ad.transpose(key)), scale)
        if logit_bias is not None:
            logits = ad.add(logits, logit_bias)
        attn = ad.softmax_masked(logits, mask)
        heads.append(ad.matmul(attn, val))
    stacked = heads[0] if len(heads) == 1 else ad.concat(heads, axis=1)
    return ad.matmul(stacked, layer.wo)


def feed_forward(x: Tensor, layer: AttentionLayerParams) -> Tensor:
    hidden = ad.relu(ad.add(ad.matmul(x, layer.w1), layer.b1))
    return ad.add(ad.matmul(hidden, layer.w2), layer.b2)


def encoder_layer(x: Tensor, layer: AttentionLayerParams) -> Tensor:
    attended = ad.layer_norm(
        ad.add(x, multi_head_attention(x, x, layer)), layer.ln1_g, layer.ln1_b
    )
    return ad.layer_norm(
        ad.add(attended, feed_forward(attended, layer)), layer.ln2_g, layer.ln2_b
    )


@dataclass
class EncoderParams:
    z_tables: Tensor  # (1, d) learnable selection token
    z_cols: Tensor  # (1, d)
    layers: list[AttentionLayerParams]
    mlp_tables: Tensor  # (d, |table vocab|)
    mlp_columns: Tensor  # (d, |column vocab|)
    table_embed: Tensor  # (|table vocab|, d)
    column_embed: Tensor  # (|column vocab|, d)
    fuse: Tensor  # (2d, d) schema-context projection
    positions: np.ndarray  # fixed sinusoid table
    max_input_len: int


def init_encoder_params(
    store: ParamStore,
    d: int,
    layers: int,
    heads: int,
    d_k: int,
    d_v: int,
    d_ff: int,
    n_table_vocab: int,
    n_column_vocab: int,
    init: Initializer,
    max_input_len: int = 1024,
) -> EncoderParams:
    return EncoderParams(
        z_tables=store.add("enc.z_tables", init.embedding(1, d)),
        z_cols=store.add("enc.z_cols", init.embedding(1, d)),
        layers=[
            init_attention_layer(store, f"enc.l{i}", d, heads, d_k, d_v, d_ff, init)
            for i in range(layers)
        ],
        mlp_tables=store.add("enc.mlp_tables", init.linear(d, n_table_vocab)),
        mlp_columns=store.add("enc.mlp_columns", init.linear(d, n_column_vocab)),
        table_embed=store.add("enc.table_embed", init.embedding(n_table_vocab, d)),
        column_embed=store.add("enc.column_embed", init.embedding(n_column_vocab, d)),
        fuse=store.add("enc.fuse", init.linear(2 * d, d)),
        positions=sinusoid_table(max_input_len + 2, d),
        max_input_len=max_input_len,
    )


def encode(token_states: Tensor, params: EncoderParams) -> tuple[Tensor, Tensor, Tensor]:
    """Run the stack over [z_tables; z_cols; tokens]; returns the question
    token states and the two selection-token states."""
    n = token_states.shape[0]
    if n < 1 or n > params.max_input_len:
        raise ValueError(f"token count {n} outside 1..{params.max_input_len}")
    x = ad.concat([params.z_tables, params.z_cols, token_states], axis=0)
    x = ad.add(x, Tensor(params.positions[: n + 2]))
    for layer in params.layers:
        x = encoder_layer(x, layer)
    x_tables = ad.reshape(ad.slice_axis(x, 0, 1), (x.shape[1],))
    x_cols = ad.reshape(ad.slice_axis(x, 1, 2), (x.shape[1],))
    x_question = ad.slice_axis(x, 2, n + 2)
    return x_question, x_tables, x_cols


def _top_k(probs: np.ndarray, allowed: list[int], k: int) -> list[int]:
    # Ties break toward the lower vocabulary index.
    ranked = sorted(allowed, key=lambda i: (-probs[i], i))
    return ranked[: min(k, len(ranked))]


def select_tables(
    x_tables: Tensor, params: EncoderParams, schema_tables: list[int], k1: int
) -> tuple[Tensor, Tensor, list[int]]:
    """Score the table vocabulary; returns (logits, probabilities, top ids
    restricted to the schema's tables)."""
    if k1 < 1:
        raise ValueError("k1 must be >= 1")
    logits = ad.matmul(x_tables, params.mlp_tables)
    probs = ad.softmax_masked(logits)
    return logits, probs, _top_k(probs.data, schema_tables, k1)


def column_mask(n_columns: int, allowed: list[int]) -> np.ndarray:
    mask = np.full(n_columns, NEG_INF)
    mask[list(allowed)] = 0.0
    return mask


def select_columns(
    x_cols: Tensor,
    params: EncoderParams,
    eligible_columns: list[int],
    k2: int,
) -> tuple[Tensor, Tensor, list[int]]:
    """Score the column vocabulary with everything outside
    `eligible_columns` masked to probability exactly zero."""
    if not eligible_columns:
        raise ValueError("no eligible columns for the selected tables")
    logits = ad.matmul(x_cols, params.mlp_columns)
    mask = column_mask(params.mlp_columns.shape[1], eligible_columns)
    probs = ad.softmax_masked(logits, mask)
    return logits, probs, _top_k(probs.data, eligible_columns, k2)


def build_schema_context(
    top_tables: list[int], top_columns: list[int], params: EncoderParams
) -> Tensor:
    """Mean-pool the selected table and column embeddings, concatenate and
    project back to the model width."""
    if not top_tables or not top_columns:
        raise ValueError("selections must be nonempty")
    t_emb = ad.embedding_gather(params.table_embed, np.array(top_tables))
    c_emb = ad.embedding_gather(params.column_embed, np.array(top_columns))
    pooled = ad.concat([ad.mean_pool(t_emb, axis=0), ad.mean_pool(c_emb, axis=0)])
    return ad.matmul(pooled, params.fuse)


def fuse(x_question: Tensor, schema_context: Tensor) -> Tensor:
    """Decoder memory: the schema context vector added onto every token row."""
    if x_question.shape[-1] != schema_context.shape[-1]:
        raise ValueError("question and schema context widths differ")
    return ad.add(x_question, schema_context)
