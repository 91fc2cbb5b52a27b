"""Gated graph-attention blocks and the two model architectures.

One block transforms node features with a learned matrix, scores every
connected pair with a symmetric bilinear form, normalizes scores with a
masked row softmax, multiplies by the adjacency values, aggregates
neighbors through a relu, and blends the result with the input through a
learned sigmoid gate.

The fused architecture runs one shared block stack twice over the joined
protein-ligand graph, once with distance-weighted intermolecular edges and
once with covalent edges only, and scores the difference of the ligand
rows. The parallel architecture runs independent ligand and protein towers
and scores the concatenated pooled embeddings, needing no interaction
information at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from . import tensorcore as tc
from .complexes import ComplexGraph
from .errors import ShapeError
from .features import LIGAND_WIDTH, PROTEIN_WIDTH
from .tensorcore import Tensor

MODEL_GNNF = "gnnf"
MODEL_GNNP = "gnnp"
HEAD_CLASSIFICATION = "classification"
HEAD_REGRESSION = "regression"

MLP_HIDDEN = (128, 64)

# Distance-weight initialization: weights peak at mu (Angstrom) and decay
# with width sigma; sigma is clamped to keep the kernel from collapsing.
MU_INIT = 4.0
SIGMA_INIT = 1.0
SIGMA_MIN = 0.1


@dataclass
class GatBlockParams:
    W_t: Tensor  # (D, D) feature transform
    W_a: Tensor  # (D, D) bilinear attention form
    U: Tensor    # (2D, 1) gate vector
    b: Tensor    # (1, 1) gate bias


@dataclass
class MlpParams:
    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor
    W3: Tensor
    b3: Tensor


@dataclass
class ModelParams:
    model_kind: str
    head_kind: str
    dim: int
    embed_ligand: Tensor            # (F_L, D)
    embed_protein: Tensor           # (F_P, D)
    blocks: list[GatBlockParams]    # shared stack (fused) / ligand tower (parallel)
    protein_blocks: list[GatBlockParams] | None
    mu: Tensor                      # (1, 1)
    sigma: Tensor                   # (1, 1), kept >= SIGMA_MIN
    mlp: MlpParams

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        """Stable (name, tensor) ordering used by the optimizer and checkpoints."""
        out = [("embed_ligand", self.embed_ligand),
               ("embed_protein", self.embed_protein)]
        for i, blk in enumerate(self.blocks):
            out += [(f"blocks.{i}.W_t", blk.W_t), (f"blocks.{i}.W_a", blk.W_a),
                    (f"blocks.{i}.U", blk.U), (f"blocks.{i}.b", blk.b)]
        if self.protein_blocks is not None:
            for i, blk in enumerate(self.protein_blocks):
                out += [(f"protein_blocks.{i}.W_t", blk.W_t),
                        (f"protein_blocks.{i}.W_a", blk.W_a),
                        (f"protein_blocks.{i}.U", blk.U),
                        (f"protein_blocks.{i}.b", blk.b)]
        out += [("mu", self.mu), ("sigma", self.sigma)]
        m = self.mlp
        out += [("mlp.W1", m.W1), ("mlp.b1", m.b1), ("mlp.W2", m.W2),
                ("mlp.b2", m.b2), ("mlp.W3", m.W3), ("mlp.b3", m.b3)]
        return out

    def clamp_constraints(self) -> None:
        """Apply parameter constraints after an optimizer step."""
        np.maximum(self.sigma.data, SIGMA_MIN, out=self.sigma.data)


def _xavier(rng: np.random.Generator, rows: int, cols: int) -> Tensor:
    bound = np.sqrt(6.0 / (rows + cols))
    return Tensor(rng.uniform(-bound, bound, size=(rows, cols)), requires_grad=True)


def _zeros(rows: int, cols: int) -> Tensor:
    return Tensor(np.zeros((rows, cols)), requires_grad=True)


def _init_block(rng: np.random.Generator, dim: int) -> GatBlockParams:
    return GatBlockParams(
        W_t=_xavier(rng, dim, dim),
        W_a=_xavier(rng, dim, dim),
        U=_xavier(rng, 2 * dim, 1),
        b=_zeros(1, 1),  # gates open at 0.5
    )


def init_model(model_kind: str, head_kind: str, dim: int, n_blocks: int,
               seed: int, label_mean: float = 0.0) -> ModelParams:
    """Seeded parameter initialization (Xavier uniform, zero biases).

    For regression heads the final bias starts at the training-label mean
    so the relu output unit is alive from the first step.
    """
    if model_kind not in (MODEL_GNNF, MODEL_GNNP):
        raise ValueError(f"unknown model kind {model_kind!r}")
    if head_kind not in (HEAD_CLASSIFICATION, HEAD_REGRESSION):
        raise ValueError(f"unknown head kind {head_kind!r}")
    rng = np.random.default_rng(seed)
    blocks = [_init_block(rng, dim) for _ in range(n_blocks)]
    protein_blocks = None
    if model_kind == MODEL_GNNP:
        protein_blocks = [_init_block(rng, dim) for _ in range(n_blocks)]
    mlp_in = dim if model_kind == MODEL_GNNF else 2 * dim
    h1, h2 = MLP_HIDDEN
    b3 = Tensor(np.array([[label_mean if head_kind == HEAD_REGRESSION else 0.0]]),
                requires_grad=True)
    return ModelParams(
        model_kind=model_kind,
        head_kind=head_kind,
        dim=dim,
        embed_ligand=_xavier(rng, LIGAND_WIDTH, dim),
        embed_protein=_xavier(rng, PROTEIN_WIDTH, dim),
        blocks=blocks,
        protein_blocks=protein_blocks,
        mu=Tensor(np.array([[MU_INIT]]), requires_grad=True),
        sigma=Tensor(np.array([[SIGMA_INIT]]), requires_grad=True),
        mlp=MlpParams(
            W1=_xavier(rng, mlp_in, h1), b1=_zeros(1, h1),
            W2=_xavier(rng, h1, h2), b2=_zeros(1, h2),
            W3=_xavier(rng, h2, 1), b3=b3,
        ),
    )


def gat_block(h: Tensor, A: Tensor, p: GatBlockParams,
              mask: np.ndarray | None = None) -> Tensor:
    """One gated-attention block over adjacency values A.

    ``mask`` fixes the attention pattern; by default it is A > 0. Runs as a
    single fused tape op through the selected kernel backend.
    """
    n, d = h.data.shape
    if A.data.shape != (n, n):
        raise ShapeError(f"adjacency {A.data.shape} does not match {n} nodes")
    if p.W_t.data.shape != (d, d) or p.W_a.data.shape != (d, d):
        raise ShapeError("block weight matrices must be (D, D)")
    if p.U.data.shape != (2 * d, 1):
        raise ShapeError(f"gate vector must be ({2 * d}, 1), got {p.U.data.shape}")
    mask_u8 = np.ascontiguousarray(
        (A.data > 0) if mask is None else mask, dtype=np.uint8)

    out_data, ctx = K.block_forward(
        np.ascontiguousarray(h.data), np.ascontiguousarray(A.data), mask_u8,
        p.W_t.data, p.W_a.data, p.U.data, float(p.b.data[0, 0]))
    out = Tensor(out_data)

    def backward(g):
        return K.block_backward(ctx, np.ascontiguousarray(g))

    return tc.record_op(out, (h, A, p.W_t, p.W_a, p.U, p.b), backward, "gat_block")


def interaction_adjacency(graph: ComplexGraph, mu: Tensor, sigma: Tensor
                          ) -> tuple[Tensor, np.ndarray]:
    """Covalent adjacency plus learnable distance weights at interaction pairs.

    Weight exp(-(d - mu)^2 / sigma) peaks for contacts near mu and feeds
    gradient back into mu and sigma. Returns the adjacency tensor and its
    boolean attention pattern.
    """
    n_p = graph.n_protein
    n = n_p + graph.n_ligand
    pairs = [(p, n_p + l) for p, l, _ in graph.interaction]
    dists = np.array([d for _, _, d in graph.interaction]).reshape(-1, 1)
    a1 = Tensor(graph.covalent_adj)
    mask = graph.covalent_adj > 0
    for i, j in pairs:
        mask[i, j] = True
        mask[j, i] = True
    diff = tc.sub(Tensor(dists), mu)
    w = tc.exp(tc.div(tc.neg(tc.mul(diff, diff)), sigma))
    a2 = tc.add(a1, tc.scatter_symmetric(w, pairs, n))
    return a2, mask


def _mlp(r: Tensor, p: MlpParams) -> Tensor:
    x = tc.relu(tc.add(tc.matmul(r, p.W1), p.b1))
    x = tc.relu(tc.add(tc.matmul(x, p.W2), p.b2))
    return tc.add(tc.matmul(x, p.W3), p.b3)


def _ligand_row_selector(n_protein: int, n_ligand: int) -> Tensor:
    sel = np.zeros((1, n_protein + n_ligand))
    sel[0, n_protein:] = 1.0
    return Tensor(sel)


def forward_gnnf(graph: ComplexGraph, params: ModelParams) -> Tensor:
    """Fused-architecture score: raw logit (classification) or relu value
    (regression). With no interaction pairs both passes coincide and the
    score collapses to a constant independent of the molecules."""
    if params.model_kind != MODEL_GNNF:
        raise ValueError("forward_gnnf needs fused-model parameters")
    xp = tc.matmul(Tensor(graph.protein_features), params.embed_protein)
    xl = tc.matmul(Tensor(graph.ligand_features), params.embed_ligand)
    x = tc.concat_rows(xp, xl)

    a1 = Tensor(graph.covalent_adj)
    mask1 = graph.covalent_adj > 0
    a2, mask2 = interaction_adjacency(graph, params.mu, params.sigma)

    h_int, h_cov = x, x
    for blk in params.blocks:
        h_int = gat_block(h_int, a2, blk, mask2)
        h_cov = gat_block(h_cov, a1, blk, mask1)
    delta = tc.sub(h_int, h_cov)

    readout = tc.matmul(_ligand_row_selector(graph.n_protein, graph.n_ligand), delta)
    score = _mlp(readout, params.mlp)
    if params.head_kind == HEAD_REGRESSION:
        score = tc.relu(score)
    return score


def _tower(features: np.ndarray, adj: np.ndarray, embed: Tensor,
           blocks: list[GatBlockParams]) -> Tensor:
    h = tc.matmul(Tensor(features), embed)
    a = Tensor(adj)
    mask = adj > 0
    for blk in blocks:
        h = gat_block(h, a, blk, mask)
    ones = Tensor(np.ones((1, features.shape[0])))
    return tc.matmul(ones, h)  # sum pool over nodes


def forward_gnnp(graph: ComplexGraph, params: ModelParams) -> Tensor:
    """Parallel-architecture score from the two independent towers.

    Interaction pairs in the graph are ignored entirely; only the covalent
    adjacencies and node features of each molecule are consumed."""
    if params.model_kind != MODEL_GNNP:
        raise ValueError("forward_gnnp needs parallel-model parameters")
    r_l = _tower(graph.ligand_features, graph.ligand_adj,
                 params.embed_ligand, params.blocks)
    r_p = _tower(graph.protein_features, graph.protein_adj,
                 params.embed_protein, params.protein_blocks)
    score = _mlp(tc.concat_cols(r_l, r_p), params.mlp)
    if params.head_kind == HEAD_REGRESSION:
        score = tc.relu(score)
    return score


def forward(graph: ComplexGraph, params: ModelParams) -> Tensor:
    if params.model_kind == MODEL_GNNF:
        return forward_gnnf(graph, params)
    return forward_gnnp(graph, params)


def predict(score: float | Tensor, head_kind: str) -> float:
    """Map a raw score to the reported prediction.

    Classification scores are logits and come back as probabilities (the
    stable sigmoid saturates cleanly for |logit| > 40); regression scores
    already passed the output relu."""
    value = score.item() if isinstance(score, Tensor) else float(score)
    if head_kind == HEAD_CLASSIFICATION:
        return float(tc.stable_sigmoid(np.array([[value]]))[0, 0])
    if head_kind == HEAD_REGRESSION:
        return value
    raise ValueError(f"unknown head kind {head_kind!r}")
