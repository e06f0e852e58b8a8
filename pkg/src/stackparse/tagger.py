"""Bi-LSTM-CRF POS tagger.

Input layer: per token, the concatenation of a frozen pretrained word
embedding, a trainable word embedding, and an attention-weighted average
of character embeddings; then the per-token vectors for a +-w context
window are concatenated (learned padding vector outside the sentence).
Feature layer: peephole bi-LSTM.  Output layer: linear emission
projection plus a CRF with start/stop states, trained by exact
sequence-level log-likelihood and decoded with Viterbi.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import numcore as nc
from .embeddings import PretrainedEmbeddings
from .treebank import Sentence

UNK = "<unk>"


class TagResult(NamedTuple):
    tags: tuple[str, ...]
    emissions: np.ndarray  # (n, |tags|)
    hidden: np.ndarray     # (n, 2*hidden)


def build_vocab(items: Iterable[str]) -> dict[str, int]:
    vocab: dict[str, int] = {}
    for item in items:
        if item not in vocab:
            vocab[item] = len(vocab)
    return vocab


class TaggerModel:
    """Parameters and forward passes; immutable once trained."""

    def __init__(self, tags: Sequence[str], word_vocab: dict[str, int],
                 char_vocab: dict[str, int], *,
                 pretrained: PretrainedEmbeddings | None = None,
                 word_dim: int = 50, char_dim: int = 30, att_dim: int = 30,
                 hidden: int = 300, layers: int = 1, window: int = 1,
                 dropout: float = 0.15, extra_input_dim: int = 0,
                 rng: np.random.Generator | None = None):
        if window < 0:
            raise ValueError("window radius must be >= 0")
        self.tags = tuple(tags)
        self.tag_index = {t: i for i, t in enumerate(self.tags)}
        self.word_vocab = dict(word_vocab)
        self.char_vocab = dict(char_vocab)
        self.pretrained = pretrained or PretrainedEmbeddings.empty()
        self.word_dim = word_dim
        self.char_dim = char_dim
        self.att_dim = att_dim
        self.hidden = hidden
        self.layers = layers
        self.window = window
        self.dropout = dropout
        self.extra_input_dim = extra_input_dim
        self.best_epoch: int | None = None
        self.dev_accuracy: float | None = None

        k = len(self.tags)
        self.per_token_dim = self.pretrained.dim + word_dim + char_dim + extra_input_dim
        input_dim = (2 * window + 1) * self.per_token_dim

        def glorot(rows, cols):
            if rng is None:
                return nc.zeros(rows, cols)
            return nc.glorot_uniform(rng, rows, cols)

        # Trainable word table starts at zero next to the frozen pretrained part.
        self.word_table = nc.Tensor(nc.zeros(len(word_vocab) + 1, word_dim), requires_grad=True)
        self.char_table = nc.Tensor(glorot(len(char_vocab) + 1, char_dim), requires_grad=True)
        self.empty_word_vec = nc.Tensor(nc.zeros(char_dim), requires_grad=True)
        self.att_proj = nc.Tensor(glorot(att_dim, char_dim), requires_grad=True)
        self.att_bias = nc.Tensor(nc.zeros(att_dim), requires_grad=True)
        self.att_query = nc.Tensor(glorot(att_dim, 1).reshape(att_dim), requires_grad=True)
        self.pad_vec = nc.Tensor(nc.zeros(self.per_token_dim), requires_grad=True)
        self.lstm_layers: list[tuple[nc.LstmCell, nc.LstmCell]] = []
        for layer in range(layers):
            dim = input_dim if layer == 0 else 2 * hidden
            self.lstm_layers.append((nc.LstmCell(nc.PEEPHOLE, dim, hidden, rng),
                                     nc.LstmCell(nc.PEEPHOLE, dim, hidden, rng)))
        self.emission_w = nc.Tensor(glorot(k, 2 * hidden), requires_grad=True)
        self.emission_b = nc.Tensor(nc.zeros(k), requires_grad=True)
        self.transitions = nc.Tensor(nc.zeros(k + 2, k + 2), requires_grad=True)

    # -- parameter bookkeeping ------------------------------------------------

    def input_parameters(self) -> dict[str, nc.Tensor]:
        return {
            "word_table": self.word_table,
            "char_table": self.char_table,
            "empty_word_vec": self.empty_word_vec,
            "att_proj": self.att_proj,
            "att_bias": self.att_bias,
            "att_query": self.att_query,
            "pad_vec": self.pad_vec,
        }

    def feature_parameters(self) -> dict[str, nc.Tensor]:
        params: dict[str, nc.Tensor] = {}
        for i, (fwd, bwd) in enumerate(self.lstm_layers):
            params.update(fwd.parameters(f"lstm{i}/fwd"))
            params.update(bwd.parameters(f"lstm{i}/bwd"))
        params["emission_w"] = self.emission_w
        params["emission_b"] = self.emission_b
        return params

    def parameters(self) -> dict[str, nc.Tensor]:
        params = self.input_parameters()
        params.update(self.feature_parameters())
        params["transitions"] = self.transitions
        return params

    def constants(self) -> dict[str, np.ndarray]:
        return {"pretrained_table": self.pretrained.matrix}

    # -- forward pieces -------------------------------------------------------

    def word_index(self, form: str) -> int:
        index = self.word_vocab.get(form)
        if index is None:
            index = self.word_vocab.get(form.lower())
        return len(self.word_vocab) if index is None else index

    def char_attention(self, word: str) -> nc.Tensor:
        if not word:
            return self.empty_word_vec
        unk_char = len(self.char_vocab)
        idx = [self.char_vocab.get(ch, unk_char) for ch in word]
        embs = nc.take_rows(self.char_table, idx)
        hidden = nc.tanh(nc.matmul(embs, nc.transpose(self.att_proj)) + self.att_bias)
        scores = nc.matmul(hidden, self.att_query)
        weights = nc.softmax(scores, axis=0)
        return nc.matmul(weights, embs)

    def token_vector(self, form: str) -> nc.Tensor:
        parts = []
        if self.pretrained.dim:
            parts.append(nc.Tensor(self.pretrained.lookup(form)))
        parts.append(nc.row(self.word_table, self.word_index(form)))
        parts.append(self.char_attention(form))
        return nc.concat(parts)

    def window_concat(self, vecs: list[nc.Tensor]) -> list[nc.Tensor]:
        n = len(vecs)
        out = []
        for t in range(n):
            slots = []
            for pos in range(t - self.window, t + self.window + 1):
                slots.append(vecs[pos] if 0 <= pos < n else self.pad_vec)
            out.append(nc.concat(slots) if len(slots) > 1 else slots[0])
        return out

    def encode(self, sentence: Sentence, training: bool = False,
               rng: np.random.Generator | None = None,
               extra: list[nc.Tensor] | None = None) -> list[nc.Tensor]:
        vecs = [self.token_vector(form) for form in sentence.forms]
        if extra is not None:
            vecs = [nc.concat([v, e]) for v, e in zip(vecs, extra)]
        elif self.extra_input_dim:
            raise ValueError("model expects stacked extra features")
        if training and self.dropout:
            vecs = [nc.dropout(v, self.dropout, rng) for v in vecs]
        return self.window_concat(vecs)

    def emissions(self, inputs: list[nc.Tensor], training: bool = False,
                  rng: np.random.Generator | None = None) -> tuple[nc.Tensor, nc.Tensor]:
        hs = nc.bilstm_encode(self.lstm_layers, inputs)
        if training and self.dropout:
            hs = [nc.dropout(h, self.dropout, rng) for h in hs]
        hidden_mat = nc.stack_rows(hs)
        em = nc.matmul(hidden_mat, nc.transpose(self.emission_w)) + self.emission_b
        return em, hidden_mat

    def gold_indices(self, sentence: Sentence) -> list[int]:
        indices = []
        for token in sentence.tokens:
            if token.upos not in self.tag_index:
                raise ValueError(f"gold tag {token.upos!r} not in the tag inventory")
            indices.append(self.tag_index[token.upos])
        return indices

    def loss(self, sentence: Sentence, training: bool = False,
             rng: np.random.Generator | None = None) -> nc.Tensor:
        inputs = self.encode(sentence, training, rng)
        em, _ = self.emissions(inputs, training, rng)
        return crf_log_likelihood(em, self.transitions, self.gold_indices(sentence))


# -- functional wrappers ------------------------------------------------------


def char_attention(model: TaggerModel, word: str) -> nc.Tensor:
    return model.char_attention(word)


def encode_tokens(model: TaggerModel, sentence: Sentence) -> list[nc.Tensor]:
    return model.encode(sentence)


# -- CRF ----------------------------------------------------------------------


def crf_log_likelihood(emissions: nc.Tensor, transitions: nc.Tensor,
                       gold_tags: Sequence[int]) -> nc.Tensor:
    """Negative log-likelihood of the gold path: log Z - score(gold).

    Transitions are (K+2, K+2) with start state K and stop state K+1; the
    normalizer comes from the forward algorithm in log space.
    """
    n, k = emissions.shape
    start, stop = k, k + 1
    if len(gold_tags) != n:
        raise ValueError("gold tag count does not match emission rows")
    gold = list(gold_tags)
    trans_rows = [start] + gold[:-1]
    gold_score = (nc.gather(emissions, list(range(n)), gold).sum()
                  + nc.gather(transitions, trans_rows, gold).sum()
                  + nc.gather(transitions, [gold[-1]], [stop]).sum())

    inner = nc.slice2d(transitions, slice(0, k), slice(0, k))
    alpha = nc.reshape(nc.slice2d(transitions, slice(start, start + 1), slice(0, k)), (k,)) \
        + nc.row(emissions, 0)
    for t in range(1, n):
        moved = nc.reshape(alpha, (k, 1)) + inner
        alpha = nc.logsumexp(moved, axis=0) + nc.row(emissions, t)
    stop_scores = nc.reshape(nc.slice2d(transitions, slice(0, k), slice(stop, stop + 1)), (k,))
    log_z = nc.logsumexp(alpha + stop_scores)
    return log_z - gold_score


def viterbi_decode(emissions: np.ndarray, transitions: np.ndarray) -> list[int]:
    """Exact maximum-scoring path; ties break toward the lowest tag index."""
    emissions = np.asarray(emissions)
    transitions = np.asarray(transitions)
    n, k = emissions.shape
    start, stop = k, k + 1
    delta = transitions[start, :k] + emissions[0]
    backpointers = []
    for t in range(1, n):
        moved = delta[:, None] + transitions[:k, :k]
        backpointers.append(moved.argmax(axis=0))
        delta = moved.max(axis=0) + emissions[t]
    final = delta + transitions[:k, stop]
    best = int(final.argmax())
    path = [best]
    for pointers in reversed(backpointers):
        best = int(pointers[best])
        path.append(best)
    path.reverse()
    return path


# -- training and inference -----------------------------------------------------


def tag(model: TaggerModel, sentence: Sentence) -> TagResult:
    """Viterbi tags plus the emission and hidden vectors (for stacking)."""
    with nc.no_grad():
        inputs = model.encode(sentence)
        em, hidden = model.emissions(inputs)
    path = viterbi_decode(em.data, model.transitions.data)
    return TagResult(tuple(model.tags[i] for i in path), em.data.copy(), hidden.data.copy())


def _snapshot(params: dict[str, nc.Tensor]) -> dict[str, np.ndarray]:
    return {name: t.data.copy() for name, t in params.items()}


def _restore(params: dict[str, nc.Tensor], snapshot: dict[str, np.ndarray]) -> None:
    for name, t in params.items():
        t.data[...] = snapshot[name]


def _tagging_accuracy(sentences: list[Sentence], tag_fn) -> float:
    total = correct = 0
    for sentence in sentences:
        predicted = tag_fn(sentence).tags
        for token, ptag in zip(sentence.tokens, predicted):
            total += 1
            correct += token.upos == ptag
    return 100.0 * correct / total if total else 0.0


def train_tagger(treebank: list[Sentence], dev: list[Sentence], config,
                 pretrained: PretrainedEmbeddings | None = None,
                 tags: Sequence[str] | None = None) -> TaggerModel:
    """Epoch-wise Adagrad over the CRF loss with dev-based epoch selection.

    Deterministic for a fixed config.seed.  The returned model carries
    best_epoch and dev_accuracy.
    """
    if not treebank:
        raise ValueError("cannot train a tagger on an empty treebank")
    if tags is None:
        tags = sorted({t.upos for s in treebank for t in s.tokens})
    else:
        missing = {t.upos for s in treebank for t in s.tokens} - set(tags)
        if missing:
            raise ValueError(f"gold tags outside the inventory: {sorted(missing)}")
    rng = nc.make_rng(config.seed)
    model = TaggerModel(
        tags,
        build_vocab(f for s in treebank for f in s.forms),
        build_vocab(ch for s in treebank for f in s.forms for ch in f),
        pretrained=pretrained,
        word_dim=config.word_dim, char_dim=config.char_dim, att_dim=config.att_dim,
        hidden=config.hidden, layers=config.layers, window=config.window,
        dropout=config.dropout, rng=rng,
    )
    params = model.parameters()
    optimizer = nc.AdagradState(config.learning_rate, l2_lambda=config.l2_lambda)
    best_acc, best_params, best_epoch = -1.0, None, None
    for epoch in range(1, config.epochs + 1):
        for i in rng.permutation(len(treebank)):
            nc.zero_grads(params.values())
            loss = model.loss(treebank[int(i)], training=True, rng=rng)
            loss.backward()
            optimizer.apply(params)
        if dev:
            acc = _tagging_accuracy(dev, lambda s: tag(model, s))
            if acc > best_acc:
                best_acc, best_params, best_epoch = acc, _snapshot(params), epoch
    if best_params is not None:
        _restore(params, best_params)
        model.best_epoch, model.dev_accuracy = best_epoch, best_acc
    else:
        model.best_epoch = config.epochs
    return model
