"""Deterministic synthetic token streams for the toy trainer."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidConfig

COPY_MOTIF_LEN = 6  # random tokens per copy block header


class CorpusKind(Enum):
    MARKOV_CHARS = "markov"
    MODULAR_COPY = "modular-copy"


@dataclass(frozen=True)
class DataConfig:
    kind: CorpusKind = CorpusKind.MARKOV_CHARS
    seed: int = 0
    length: int = 200_000
    vocab: int = 64
    batch: int = 16

    def __post_init__(self):
        if self.vocab < 2:
            raise InvalidConfig("vocab must be >= 2")
        if self.length < 2:
            raise InvalidConfig("length must be >= 2")
        if self.batch < 1:
            raise InvalidConfig("batch must be >= 1")


# Transition rows are a peaky Dirichlet draw (small concentration) mixed
# from a shared bigram table and a pair-specific trigram table. The bigram
# share keeps the stream learnable by a desk-scale model within a few
# thousand steps; the trigram share still rewards attention over context.
MARKOV_CONCENTRATION = 0.08
MARKOV_BIGRAM_WEIGHT = 0.8


def markov_transitions(seed: int, vocab: int) -> np.ndarray:
    """Order-2 transition tensor P[a, b, c] = P(next=c | prev2=a, prev=b)."""
    rng = np.random.default_rng([seed, 0x2A17])
    bigram = rng.gamma(shape=MARKOV_CONCENTRATION, scale=1.0, size=(vocab, vocab)) + 1e-6
    bigram /= bigram.sum(axis=-1, keepdims=True)
    trigram = rng.gamma(shape=MARKOV_CONCENTRATION, scale=1.0, size=(vocab, vocab, vocab)) + 1e-6
    trigram /= trigram.sum(axis=-1, keepdims=True)
    w = MARKOV_BIGRAM_WEIGHT
    mixed = w * bigram[None, :, :] + (1.0 - w) * trigram
    return mixed / mixed.sum(axis=-1, keepdims=True)


def _gen_markov(cfg: DataConfig) -> np.ndarray:
    trans = markov_transitions(cfg.seed, cfg.vocab)
    cum = np.cumsum(trans, axis=-1)
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    out = np.empty(cfg.length, dtype=np.int64)
    a, b = rng.integers(0, cfg.vocab, size=2)
    out[0], out[1] = a, b
    draws = rng.random(cfg.length)
    for i in range(2, cfg.length):
        c = int(np.searchsorted(cum[a, b], draws[i]))
        out[i] = c
        a, b = b, c
    return out


def copy_offset(seed: int, vocab: int) -> int:
    """Corpus-wide copy offset, a deterministic function of the seed."""
    return int(np.random.default_rng([seed, 0x0FF5]).integers(1, vocab))


def _gen_modular_copy(cfg: DataConfig) -> np.ndarray:
    # Blocks of [m motif tokens, motif + o, motif + 2*o] for a corpus-wide
    # offset o: everything after the motif header is determined by it.
    rng = np.random.default_rng([cfg.seed, 0xC0B1])
    m = COPY_MOTIF_LEN
    offset = copy_offset(cfg.seed, cfg.vocab)
    n_blocks = cfg.length // (3 * m) + 1
    motifs = rng.integers(0, cfg.vocab, size=(n_blocks, m))
    blocks = np.concatenate(
        [motifs, (motifs + offset) % cfg.vocab, (motifs + 2 * offset) % cfg.vocab], axis=1
    )
    return blocks.reshape(-1)[: cfg.length].astype(np.int64)


def gen_corpus(cfg: DataConfig) -> np.ndarray:
    """Deterministic token stream of exactly cfg.length tokens."""
    if cfg.kind is CorpusKind.MARKOV_CHARS:
        return _gen_markov(cfg)
    return _gen_modular_copy(cfg)


def batch_sampler(cfg: DataConfig, stream: np.ndarray, window: int):
    """Yields (batch, window) token slabs drawn at seeded random offsets."""
    if stream.size < window:
        raise InvalidConfig(f"corpus length {stream.size} below window {window}")
    rng = np.random.default_rng([cfg.seed, 0xBA7C])
    limit = stream.size - window + 1
    while True:
        starts = rng.integers(0, limit, size=cfg.batch)
        yield np.stack([stream[s : s + window] for s in starts])
