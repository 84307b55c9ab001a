"""CBOW word2vec with negative sampling, trained per time bucket.

The trainer predicts a center word from the mean of its context input
vectors against a sigmoid over the center's output vector and k sampled
negatives. `cbow_step` is the plain-numpy single update used by gradient
tests; `train` runs the same math through a numba kernel for speed. With
threads=1 and a fixed seed the trained model is bit-reproducible.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numba import njit, prange, set_num_threads

MODEL_MAGIC = b"BCW2V\x00"
MODEL_VERSION = 1
LR_FLOOR_FRACTION = 1e-4  # final lr = initial_lr / 10,000


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 300
    window: int = 5
    epochs: int = 5
    initial_lr: float = 0.025
    negatives: int = 5
    subsample_t: float = 1e-3
    min_count: int = 5
    seed: int = 1
    threads: int = 1

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.epochs < 1:
            raise ValueError("dim, window and epochs must all be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.initial_lr <= 0:
            raise ValueError("initial_lr must be > 0")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")
        if self.subsample_t < 0:
            raise ValueError("subsample_t must be >= 0 (0 disables)")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


class Vocabulary:
    """Dense word index with pre-filter corpus frequencies.

    Words are ordered by descending frequency (ties alphabetical) so the
    index assignment is deterministic. total_tokens is the number of
    corpus tokens covered by retained words, i.e. what the trainer sees.
    """

    def __init__(self, words: list[str], counts: np.ndarray,
                 min_count: int):
        self.words = list(words)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.min_count = min_count
        self.index = {w: i for i, w in enumerate(self.words)}
        self.total_tokens = int(self.counts.sum())

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index


def _token_streams(corpus) -> Iterable[Sequence[str]]:
    if hasattr(corpus, "tokens"):
        return corpus.tokens()
    return corpus


def build_vocab(corpus, min_count: int = 5) -> Vocabulary:
    """Count words over a bucket and retain those at or above min_count."""
    counts: dict[str, int] = {}
    for tokens in _token_streams(corpus):
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
    if not counts:
        raise ValueError("corpus has no tokens")
    retained = [(w, c) for w, c in counts.items() if c >= min_count]
    if not retained:
        raise ValueError(
            f"min_count={min_count} filters out the whole vocabulary")
    retained.sort(key=lambda wc: (-wc[1], wc[0]))
    words = [w for w, _ in retained]
    freq = np.array([c for _, c in retained], dtype=np.int64)
    return Vocabulary(words, freq, min_count)


def negative_table(vocab: Vocabulary) -> np.ndarray:
    """Unigram^0.75 sampling distribution over the vocabulary."""
    weights = vocab.counts.astype(np.float64) ** 0.75
    return weights / weights.sum()


def subsample_keep_prob(freq: float, t: float) -> float:
    """Keep probability for a word with relative frequency freq."""
    if not 0 < freq <= 1:
        raise ValueError("freq must be in (0, 1]")
    if t <= 0:
        raise ValueError("t must be > 0")
    return min(1.0, (np.sqrt(freq / t) + 1.0) * t / freq)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def _softplus(x: float) -> float:
    # log(1 + exp(x)) without overflow
    if x > 0:
        return x + np.log1p(np.exp(-x))
    return np.log1p(np.exp(x))


@dataclass
class EmbeddingModel:
    """A trained bucket model: vocabulary plus input/output vector tables.

    Bias analyses read input_vectors only; output_vectors are kept so a
    saved model can resume training or be inspected.
    """

    vocab: Vocabulary
    dim: int
    input_vectors: np.ndarray
    output_vectors: np.ndarray
    train_config: TrainConfig
    seed: int
    epoch_losses: list[float] = field(default_factory=list)

    def __contains__(self, word: str) -> bool:
        return word in self.vocab

    def vector(self, word: str) -> np.ndarray:
        return self.input_vectors[self.vocab.index[word]]

    def similarity(self, w1: str, w2: str) -> float:
        return cosine(self.vector(w1), self.vector(w2))


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; raises on a zero-norm argument."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine undefined for zero-norm vector")
    return float(np.dot(u, v) / (nu * nv))


def cbow_step(model: EmbeddingModel, center_index: int,
              context_indices: Sequence[int],
              negatives_drawn: Sequence[int], lr: float) -> float:
    """One CBOW negative-sampling update; returns the pre-update loss.

    The hidden state h is the mean of the context input vectors. Loss is
    -log sig(u_c . h) - sum_k log sig(-u_k . h). All gradients are taken
    at the current parameters, then applied in one step, so repeated row
    indices (a negative equal to the center, duplicated context words)
    accumulate their gradient contributions on the shared row.
    """
    if len(context_indices) == 0:
        return 0.0
    inp = model.input_vectors
    out = model.output_vectors
    ctx = np.asarray(context_indices, dtype=np.int64)
    h = inp[ctx].mean(axis=0)

    outputs = np.concatenate(([center_index], np.asarray(negatives_drawn,
                                                         dtype=np.int64)))
    labels = np.zeros(len(outputs))
    labels[0] = 1.0
    scores = out[outputs] @ h
    loss = _softplus(-scores[0]) + sum(_softplus(s) for s in scores[1:])

    g = np.array([_sigmoid(s) for s in scores]) - labels
    grad_h = g @ out[outputs]
    # output rows first (computed from original values above)
    for o, go in zip(outputs, g):
        out[o] -= lr * go * h
    scale = lr / len(ctx)
    for c in ctx:
        inp[c] -= scale * grad_h
    return float(loss)


# ---------------------------------------------------------------------------
# numba training kernel
#
# Randomness is a 64-bit LCG (state*6364136223846793005 + 1442695040888963407,
# uniform from the top 53 bits) with a splitmix64-derived state per
# (epoch, document), so the serial and hogwild paths consume identical
# random streams and the learning-rate schedule depends only on token
# position, never on thread timing.
# ---------------------------------------------------------------------------

U64_MULT = np.uint64(6364136223846793005)
U64_INC = np.uint64(1442695040888963407)


@njit(cache=True)
def _mix64(x):
    x = np.uint64(x) + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@njit(cache=True)
def _doc_state(seed, epoch, doc):
    z = np.uint64(seed) ^ _mix64(np.uint64(epoch) * np.uint64(0x632BE59BD9B4E019)
                                 + np.uint64(doc))
    return _mix64(z)


@njit(cache=True, inline="always")
def _next_uniform(state):
    state = state * U64_MULT + U64_INC
    return state, np.float64(state >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _sample_negative(cum, u):
    lo = 0
    hi = cum.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if u < cum[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def _train_doc(tokens, start, end, inp, out, cum, keep_prob, window,
               negatives, initial_lr, total_planned, epoch_base, state,
               sent, ctx, outs, gvec, h, grad_h):
    """Train on one document; returns (loss_sum, n_updates)."""
    dim = inp.shape[1]
    n_sent = 0
    for pos in range(start, end):
        w = tokens[pos]
        if keep_prob[w] < 1.0:
            state, u = _next_uniform(state)
            if u >= keep_prob[w]:
                continue
        sent[n_sent] = w
        n_sent += 1

    loss_sum = 0.0
    n_updates = 0
    for i in range(n_sent):
        center = sent[i]
        # linear decay by absolute token position, floored at lr/10,000
        progress = np.float64(epoch_base + start + i) / total_planned
        lr = initial_lr * (1.0 - progress)
        floor = initial_lr * 1e-4
        if lr < floor:
            lr = floor

        state, u = _next_uniform(state)
        eff = 1 + np.int64(u * window)
        if eff > window:
            eff = window
        n_ctx = 0
        lo = i - eff
        if lo < 0:
            lo = 0
        hi = i + eff + 1
        if hi > n_sent:
            hi = n_sent
        for j in range(lo, hi):
            if j != i:
                ctx[n_ctx] = sent[j]
                n_ctx += 1
        if n_ctx == 0:
            continue

        for d in range(dim):
            h[d] = 0.0
        for j in range(n_ctx):
            row = ctx[j]
            for d in range(dim):
                h[d] += inp[row, d]
        inv_c = 1.0 / n_ctx
        for d in range(dim):
            h[d] *= inv_c

        outs[0] = center
        for k in range(negatives):
            state, u = _next_uniform(state)
            neg = _sample_negative(cum, u)
            redraws = 0
            while neg == center and redraws < 3:
                state, u = _next_uniform(state)
                neg = _sample_negative(cum, u)
                redraws += 1
            outs[1 + k] = neg

        loss = 0.0
        for k in range(negatives + 1):
            row = outs[k]
            s = 0.0
            for d in range(dim):
                s += out[row, d] * h[d]
            if k == 0:
                # -log sigmoid(s) = softplus(-s)
                if s > 0.0:
                    loss += np.log1p(np.exp(-s))
                else:
                    loss += -s + np.log1p(np.exp(s))
                if s >= 0.0:
                    sig = 1.0 / (1.0 + np.exp(-s))
                else:
                    e = np.exp(s)
                    sig = e / (1.0 + e)
                gvec[k] = sig - 1.0
            else:
                if s > 0.0:
                    loss += s + np.log1p(np.exp(-s))
                else:
                    loss += np.log1p(np.exp(s))
                if s >= 0.0:
                    sig = 1.0 / (1.0 + np.exp(-s))
                else:
                    e = np.exp(s)
                    sig = e / (1.0 + e)
                gvec[k] = sig

        for d in range(dim):
            grad_h[d] = 0.0
        for k in range(negatives + 1):
            row = outs[k]
            gk = gvec[k]
            for d in range(dim):
                grad_h[d] += gk * out[row, d]
        for k in range(negatives + 1):
            row = outs[k]
            step = lr * gvec[k]
            for d in range(dim):
                out[row, d] -= step * h[d]
        scale = lr * inv_c
        for j in range(n_ctx):
            row = ctx[j]
            for d in range(dim):
                inp[row, d] -= scale * grad_h[d]

        loss_sum += loss
        n_updates += 1
    return loss_sum, n_updates


@njit(cache=True)
def _train_serial(tokens, offsets, inp, out, cum, keep_prob, window,
                  negatives, initial_lr, epochs, seed, epoch_losses):
    n_docs = offsets.shape[0] - 1
    n_tokens = tokens.shape[0]
    total_planned = np.float64(epochs * n_tokens)
    max_doc = 0
    for d in range(n_docs):
        length = offsets[d + 1] - offsets[d]
        if length > max_doc:
            max_doc = length
    sent = np.empty(max_doc, dtype=np.int32)
    ctx = np.empty(2 * window, dtype=np.int32)
    outs = np.empty(negatives + 1, dtype=np.int32)
    gvec = np.empty(negatives + 1, dtype=np.float64)
    h = np.empty(inp.shape[1], dtype=np.float64)
    grad_h = np.empty(inp.shape[1], dtype=np.float64)

    for epoch in range(epochs):
        epoch_base = epoch * n_tokens
        loss_sum = 0.0
        n_updates = 0
        for d in range(n_docs):
            state = _doc_state(np.uint64(seed), np.uint64(epoch), np.uint64(d))
            ls, nu = _train_doc(tokens, offsets[d], offsets[d + 1], inp, out,
                                cum, keep_prob, window, negatives, initial_lr,
                                total_planned, epoch_base, state,
                                sent, ctx, outs, gvec, h, grad_h)
            loss_sum += ls
            n_updates += nu
        epoch_losses[epoch] = loss_sum / max(n_updates, 1)


@njit(cache=True, parallel=True)
def _train_hogwild(tokens, offsets, inp, out, cum, keep_prob, window,
                   negatives, initial_lr, epochs, seed, epoch_losses):
    # Lock-free shared updates: vector rows may race, results are then
    # nondeterministic. Random streams and lr schedule stay per-document.
    n_docs = offsets.shape[0] - 1
    n_tokens = tokens.shape[0]
    total_planned = np.float64(epochs * n_tokens)
    max_doc = 0
    for d in range(n_docs):
        length = offsets[d + 1] - offsets[d]
        if length > max_doc:
            max_doc = length

    for epoch in range(epochs):
        epoch_base = epoch * n_tokens
        doc_loss = np.zeros(n_docs, dtype=np.float64)
        doc_updates = np.zeros(n_docs, dtype=np.int64)
        for d in prange(n_docs):
            sent = np.empty(max_doc, dtype=np.int32)
            ctx = np.empty(2 * window, dtype=np.int32)
            outs = np.empty(negatives + 1, dtype=np.int32)
            gvec = np.empty(negatives + 1, dtype=np.float64)
            h = np.empty(inp.shape[1], dtype=np.float64)
            grad_h = np.empty(inp.shape[1], dtype=np.float64)
            state = _doc_state(np.uint64(seed), np.uint64(epoch), np.uint64(d))
            ls, nu = _train_doc(tokens, offsets[d], offsets[d + 1], inp, out,
                                cum, keep_prob, window, negatives, initial_lr,
                                total_planned, epoch_base, state,
                                sent, ctx, outs, gvec, h, grad_h)
            doc_loss[d] = ls
            doc_updates[d] = nu
        epoch_losses[epoch] = doc_loss.sum() / max(doc_updates.sum(), 1)


def encode_corpus(corpus, vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    """Map documents to index arrays; out-of-vocabulary tokens are dropped."""
    tokens: list[int] = []
    offsets = [0]
    for doc in _token_streams(corpus):
        tokens.extend(vocab.index[t] for t in doc if t in vocab.index)
        offsets.append(len(tokens))
    return (np.asarray(tokens, dtype=np.int32),
            np.asarray(offsets, dtype=np.int64))


def train(corpus, config: TrainConfig | None = None) -> EmbeddingModel:
    """Train a CBOW model on one bucket corpus.

    Input vectors start uniform in +-0.5/dim, output vectors at zero; the
    learning rate decays linearly from initial_lr to initial_lr/10,000
    over epochs * corpus-token positions.
    """
    config = config or TrainConfig()
    vocab = build_vocab(corpus, config.min_count)
    tokens, offsets = encode_corpus(corpus, vocab)

    rng = np.random.default_rng(config.seed)
    inp = (rng.random((len(vocab), config.dim)) - 0.5) / config.dim
    out = np.zeros((len(vocab), config.dim))

    probs = negative_table(vocab)
    cum = np.cumsum(probs)
    cum[-1] = 1.0

    freq = vocab.counts / vocab.total_tokens
    if config.subsample_t > 0:
        keep = np.minimum(
            1.0, (np.sqrt(freq / config.subsample_t) + 1.0)
            * config.subsample_t / freq)
    else:
        keep = np.ones(len(vocab))

    epoch_losses = np.zeros(config.epochs)
    if tokens.shape[0] > 0:
        if config.threads == 1:
            _train_serial(tokens, offsets, inp, out, cum, keep,
                          config.window, config.negatives, config.initial_lr,
                          config.epochs, config.seed, epoch_losses)
        else:
            set_num_threads(config.threads)
            _train_hogwild(tokens, offsets, inp, out, cum, keep,
                           config.window, config.negatives, config.initial_lr,
                           config.epochs, config.seed, epoch_losses)

    return EmbeddingModel(vocab=vocab, dim=config.dim, input_vectors=inp,
                          output_vectors=out, train_config=config,
                          seed=config.seed,
                          epoch_losses=[float(x) for x in epoch_losses])


# ---------------------------------------------------------------------------
# model file format (see README for the byte-layout table)
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<6sIQIqIIIIdd")  # magic, version, V, dim, seed,
# window, epochs, negatives, min_count, initial_lr, subsample_t


def save_model(model: EmbeddingModel, path: str | Path) -> None:
    """Write the binary model plus its "<path>.vocab" sidecar."""
    path = Path(path)
    cfg = model.train_config
    header = _HEADER.pack(MODEL_MAGIC, MODEL_VERSION, len(model.vocab),
                          model.dim, model.seed, cfg.window, cfg.epochs,
                          cfg.negatives, cfg.min_count, cfg.initial_lr,
                          cfg.subsample_t)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(
            model.input_vectors, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(
            model.output_vectors, dtype="<f4").tobytes())
    with open(str(path) + ".vocab", "w", encoding="utf-8") as fh:
        for w, c in zip(model.vocab.words, model.vocab.counts):
            fh.write(f"{w} {int(c)}\n")


def load_model(path: str | Path) -> EmbeddingModel:
    """Read a model saved by save_model; vectors come back as float64."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        (magic, version, v, dim, seed, window, epochs, negatives,
         min_count, initial_lr, subsample_t) = _HEADER.unpack(head)
        if magic != MODEL_MAGIC:
            raise ValueError(f"{path} is not a model file (bad magic)")
        if version != MODEL_VERSION:
            raise ValueError(f"unsupported model version {version}")
        n = v * dim
        inp = np.frombuffer(fh.read(4 * n), dtype="<f4", count=n)
        out = np.frombuffer(fh.read(4 * n), dtype="<f4", count=n)

    words, counts = [], []
    with open(str(path) + ".vocab", encoding="utf-8") as fh:
        for line in fh:
            word, cnt = line.rsplit(" ", 1)
            words.append(word)
            counts.append(int(cnt))
    if len(words) != v:
        raise ValueError(f"vocab sidecar lists {len(words)} words, header {v}")

    vocab = Vocabulary(words, np.asarray(counts, dtype=np.int64), min_count)
    cfg = TrainConfig(dim=dim, window=window, epochs=epochs,
                      initial_lr=initial_lr, negatives=negatives,
                      subsample_t=subsample_t, min_count=min_count, seed=seed)
    return EmbeddingModel(
        vocab=vocab, dim=dim,
        input_vectors=inp.reshape(v, dim).astype(np.float64),
        output_vectors=out.reshape(v, dim).astype(np.float64),
        train_config=cfg, seed=seed)
