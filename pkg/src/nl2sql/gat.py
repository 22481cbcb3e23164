"""Graph attention layers for the question and schema graphs.

Single-head attention over each node's neighborhood (self loop included):
per layer the nodes are projected, pairwise logits are
``leaky_relu(a_src . z_i + a_dst . z_j)`` plus, on typed graphs, a learned
scalar bias per edge type, masked to the adjacency, softmax-normalized and
used to mix the projected neighbors.  A ReLU sits between stacked layers
but not after the last, so a single isolated node comes out as its own
projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import NEG_INF, Tensor
from .params import Initializer, ParamStore


@dataclass
class GatLayerParams:
    proj: Tensor  # (d, d)
    attn_src: Tensor  # (d,)
    attn_dst: Tensor  # (d,)


@dataclass
class GatParams:
    layers: list[GatLayerParams]
    edge_bias: Tensor | None  # (n_edge_types,) scalar logit bias, typed graphs only
    leaky_slope: float = 0.2


def init_gat_params(
    store: ParamStore,
    prefix: str,
    dim: int,
    n_layers: int,
    init: Initializer,
    n_edge_types: int | None = None,
) -> GatParams:
    layers = []
    for i in range(n_layers):
        layers.append(
            GatLayerParams(
                proj=store.add(f"{prefix}.l{i}.proj", init.linear(dim, dim)),
                attn_src=store.add(f"{prefix}.l{i}.attn_src", init.vector(dim)),
                attn_dst=store.add(f"{prefix}.l{i}.attn_dst", init.vector(dim)),
            )
        )
    edge_bias = None
    if n_edge_types is not None:
        edge_bias = store.add(f"{prefix}.edge_bias", init.zeros(n_edge_types))
    return GatParams(layers, edge_bias)


def _neighborhood_mask(n: int, edges) -> np.ndarray:
    """Additive (n, n) mask: 0 on self loops and undirected edges, -inf off."""
    mask = np.full((n, n), NEG_INF)
    np.fill_diagonal(mask, 0.0)
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) out of range for {n} nodes")
        mask[i, j] = 0.0
        mask[j, i] = 0.0
    return mask


def _edge_type_matrix(n: int, edges, edge_types, n_types: int) -> np.ndarray:
    """(n_types, n*n) indicator used to scatter learned scalar biases."""
    ind = np.zeros((n_types, n * n))
    ind[0, :: n + 1] = 1.0  # self loops carry the reserved type 0
    for (i, j), t in zip(edges, edge_types):
        if not 0 <= t < n_types:
            raise ValueError(f"edge type {t} out of range")
        ind[t, i * n + j] = 1.0
        ind[t, j * n + i] = 1.0
        ind[0, i * n + i] = 1.0  # keep diagonal as self type
    return ind


def gat_forward(
    x: Tensor,
    edges,
    params: GatParams,
    edge_types=None,
) -> Tensor:
    """Run the attention layers over node features (n, d)."""
    n = x.shape[0]
    if n == 0:
        raise ValueError("graph has no nodes")
    mask = _neighborhood_mask(n, edges)
    bias = None
    if edge_types is not None:
        if params.edge_bias is None:
            raise ValueError("edge types given but this GAT has no edge-bias table")
        ind = _edge_type_matrix(n, edges, edge_types, params.edge_bias.shape[0])
        bias = ad.reshape(ad.matmul(params.edge_bias, Tensor(ind)), (n, n))

    h = x
    for li, layer in enumerate(params.layers):
        if li > 0:
            h = ad.relu(h)
        z = ad.matmul(h, layer.proj)
        src = ad.reshape(ad.matmul(z, layer.attn_src), (n, 1))
        dst = ad.reshape(ad.matmul(z, layer.attn_dst), (1, n))
        logits = ad.leaky_relu(ad.add(src, dst), params.leaky_slope)
        if bias is not None:
            logits = ad.add(logits, bias)
        coeff = ad.softmax_masked(logits, mask)
        h = ad.matmul(coeff, z)
    return h


def pool_schema(node_states: Tensor) -> Tensor:
    """Mean of all schema node features: one vector per database."""
    if node_states.shape[0] == 0:
        raise ValueError("cannot pool an empty node set")
    return ad.mean_pool(node_states, axis=0)
