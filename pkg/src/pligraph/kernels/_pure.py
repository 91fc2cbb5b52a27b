"""Numpy fallback for the fused gated-attention block kernels.

Same contract as the compiled extension: ``block_forward`` returns the
updated node features plus a context tuple, ``block_backward`` consumes the
context and the output gradient and returns gradients for every input.
"""

from __future__ import annotations

import numpy as np


def _masked_softmax(e: np.ndarray, mask: np.ndarray) -> np.ndarray:
    neg = np.where(mask, e, -np.inf)
    rowmax = neg.max(axis=1, keepdims=True, initial=-np.inf)
    rowmax = np.where(np.isfinite(rowmax), rowmax, 0.0)
    z = np.exp(np.where(mask, e - rowmax, -np.inf))
    denom = z.sum(axis=1, keepdims=True)
    return z / np.where(denom == 0.0, 1.0, denom)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def block_forward(h, A, mask, Wt, Wa, U, b):
    """One gated-attention block.

    h: (N, D) node features; A: (N, N) adjacency values; mask: (N, N) bool
    attention pattern; Wt/Wa: (D, D); U: (2D, 1); b: float gate bias.
    Returns (out, ctx).
    """
    d = h.shape[1]
    z = h @ Wt
    s_mat = (z @ Wa) @ z.T
    e = s_mat + s_mat.T
    s = _masked_softmax(e, mask)
    a = s * A
    t = a @ z
    h2 = np.maximum(t, 0.0)
    q = h @ U[:d] + h2 @ U[d:] + b
    gate = _sigmoid(q)
    out = gate * h + (1.0 - gate) * h2
    ctx = (h, A, Wt, Wa, U, z, s, a, t, h2, gate)
    return out, ctx


def block_backward(ctx, g_out):
    """Gradients of the block w.r.t. (h, A, Wt, Wa, U, b)."""
    h, A, Wt, Wa, U, z, s, a, t, h2, gate = ctx
    d = h.shape[1]

    gq = (g_out * (h - h2)).sum(axis=1, keepdims=True) * gate * (1.0 - gate)
    gh = g_out * gate
    gh2 = g_out * (1.0 - gate)

    gU = np.vstack([h.T @ gq, h2.T @ gq])
    gb = gq.sum().reshape(1, 1)
    gh = gh + gq @ U[:d].T
    gh2 = gh2 + gq @ U[d:].T

    p = gh2 * (t > 0.0)
    ga = p @ z.T
    gz = a.T @ p

    gs = ga * A
    gA = ga * s

    dot = (gs * s).sum(axis=1, keepdims=True)
    ge = s * (gs - dot)
    gS = ge + ge.T

    gWa = z.T @ gS @ z
    gz = gz + gS @ (z @ Wa.T) + gS.T @ (z @ Wa)

    gh = gh + gz @ Wt.T
    gWt = h.T @ gz
    return gh, gA, gWt, gWa, gU, gb
