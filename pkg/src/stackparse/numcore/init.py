"""Parameter initialization: orthogonal recurrent weights, Glorot-uniform
projections, zero biases.  All draws come from a caller-supplied seeded
generator so training runs are bit-reproducible.
"""

from __future__ import annotations

import numpy as np

from .tensor import get_default_dtype


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def glorot_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols)).astype(get_default_dtype())


def orthogonal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Orthogonal (or orthonormal-column) matrix via QR with sign fixing."""
    big, small = max(rows, cols), min(rows, cols)
    a = rng.standard_normal((big, small))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # unique decomposition, removes QR sign ambiguity
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(q[:rows, :cols], dtype=get_default_dtype())


def orthogonal_gate_stack(rng: np.random.Generator, gates: int, hidden: int) -> np.ndarray:
    """Stack per-gate orthogonal (H, H) blocks into a (gates*H, H) matrix."""
    return np.concatenate([orthogonal(rng, hidden, hidden) for _ in range(gates)], axis=0)


def glorot_gate_stack(rng: np.random.Generator, gates: int, hidden: int, input_dim: int) -> np.ndarray:
    return np.concatenate([glorot_uniform(rng, hidden, input_dim) for _ in range(gates)], axis=0)


def zeros(*shape) -> np.ndarray:
    return np.zeros(shape, dtype=get_default_dtype())
