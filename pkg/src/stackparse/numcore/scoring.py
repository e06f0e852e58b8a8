"""Biaffine scoring: the bilinear form behind arc and label scores."""

from __future__ import annotations

from .tensor import Tensor, bilinear_labels, matmul, reshape


def biaffine(u: Tensor, w: Tensor, v: Tensor, bias: float | None = None,
             w_u: Tensor | None = None, w_v: Tensor | None = None) -> Tensor:
    """Bilinear score(s) u^T W v with optional linear/bias terms.

    With W of shape (len(u), len(v)) the result is a scalar; a 3-tensor
    (labels, len(u), len(v)) yields one score per label.  Bias absorption
    is the caller's job (extend u with a constant 1).
    """
    if w.ndim == 2:
        out = matmul(matmul(u, w), v)
    elif w.ndim == 3:
        labels = w.shape[0]
        u2 = reshape(u, (1, u.shape[0]))
        v2 = reshape(v, (1, v.shape[0]))
        out = reshape(bilinear_labels(w, u2, v2), (labels,))
    else:
        raise ValueError("W must be a matrix or a 3-tensor")
    if w_u is not None:
        out = out + matmul(w_u, u)
    if w_v is not None:
        out = out + matmul(w_v, v)
    if bias is not None:
        out = out + bias
    return out
