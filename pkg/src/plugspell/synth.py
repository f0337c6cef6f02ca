"""Synthetic desk-scale corpora for training and verification.

Builds a miniature character "language": a pool of CJK characters, a random
confusion relation, and a general lexicon of multi-character words. General
sentences are short word concatenations; sources get one confusion-style
corruption and identical context-noise padding, so the base model can learn
both to repair word-internal errors and to copy unstructured context through.

Pure random character sequences would be uncorrectable (there is nothing to
learn), which is why the corpus has word structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import CorruptionConfig, corrupt_term, pad_with_context_noise
from .text import CharVocab, ConfusionSet, Lexicon, ParallelPair, Sentence, encode_text

CJK_BASE = 0x4E00


@dataclass
class SynthWorld:
    vocab: CharVocab
    confusion: ConfusionSet
    general_lexicon: Lexicon


def _hamming1_collides(word: str, taken: set[str]) -> bool:
    if word in taken:
        return True
    for other in taken:
        if len(other) == len(word) and sum(a != b for a, b in zip(other, word)) <= 1:
            return True
    return False


def _draw_words(chars: tuple[str, ...], n_words: int, len_range: tuple[int, int],
                rng: np.random.Generator, avoid: set[str]) -> list[str]:
    """Random words, rejecting anything within Hamming distance 1 of existing
    same-length words so corrupted forms stay unambiguous."""
    words: list[str] = []
    taken = set(avoid)
    attempts = 0
    while len(words) < n_words:
        attempts += 1
        if attempts > 200 * n_words:
            raise RuntimeError("could not draw enough distinct words; enlarge the char pool")
        length = int(rng.integers(len_range[0], len_range[1] + 1))
        word = "".join(chars[int(i)] for i in rng.integers(len(chars), size=length))
        if _hamming1_collides(word, taken):
            continue
        taken.add(word)
        words.append(word)
    return words


def make_world(seed: int, n_chars: int = 300, n_words: int = 120,
               word_len: tuple[int, int] = (2, 4), confusions_per_char: int = 3) -> SynthWorld:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 10)))
    chars = tuple(chr(CJK_BASE + i) for i in range(n_chars))
    vocab = CharVocab(chars)
    table: dict[str, tuple[str, ...]] = {}
    for i, ch in enumerate(chars):
        cands: list[str] = []
        while len(cands) < confusions_per_char:
            j = int(rng.integers(n_chars))
            if j != i and chars[j] not in cands:
                cands.append(chars[j])
        table[ch] = tuple(cands)
    confusion = ConfusionSet(table)
    words = _draw_words(chars, n_words, word_len, rng, avoid=set())
    return SynthWorld(vocab, confusion, Lexicon(tuple(words)))


def make_domain_lexicon(world: SynthWorld, n_terms: int, seed: int,
                        term_len: tuple[int, int] = (2, 5),
                        avoid: tuple[str, ...] = ()) -> Lexicon:
    """Domain terms over the same character pool, distinct from the general
    words (and from `avoid`, e.g. another domain's terms)."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 11)))
    taken = set(world.general_lexicon.terms) | set(avoid)
    terms = _draw_words(world.vocab.chars, n_terms, term_len, rng, avoid=taken)
    return Lexicon(tuple(terms))


def make_general_pairs(world: SynthWorld, n_sentences: int, seed: int,
                       words_per_sentence: tuple[int, int] = (2, 4),
                       cfg: CorruptionConfig | None = None) -> list[ParallelPair]:
    """Corrupted/clean sentence pairs over the general lexicon.

    Each target is a concatenation of lexicon words; the source applies the
    standard one-position corruption (or none, with p_keep) and both sides get
    identical context-noise padding.
    """
    if cfg is None:
        cfg = CorruptionConfig(pad_len_min=2, pad_len_max=6, seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 12)))
    words = world.general_lexicon.terms
    pairs: list[ParallelPair] = []
    for _ in range(n_sentences):
        k = int(rng.integers(words_per_sentence[0], words_per_sentence[1] + 1))
        text = "".join(words[int(i)] for i in rng.integers(len(words), size=k))
        target = encode_text(world.vocab, text)
        src, tgt = corrupt_term(target, world.confusion, cfg, world.vocab, rng)
        src, tgt = pad_with_context_noise(src, tgt, cfg, world.vocab, rng)
        pairs.append(ParallelPair(src, tgt))
    return pairs


def make_term_variants(world: SynthWorld, lexicon: Lexicon, per_term: int, seed: int,
                       cfg: CorruptionConfig | None = None,
                       only_corrupted: bool = False) -> list[ParallelPair]:
    """Corrupted+padded variants of domain terms, e.g. held-out test sets."""
    if cfg is None:
        cfg = CorruptionConfig(seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 13)))
    pairs: list[ParallelPair] = []
    for term in lexicon:
        sent = encode_text(world.vocab, term)
        made = 0
        while made < per_term:
            src, tgt = corrupt_term(sent, world.confusion, cfg, world.vocab, rng)
            if only_corrupted and src.chars == tgt.chars:
                continue
            src, tgt = pad_with_context_noise(src, tgt, cfg, world.vocab, rng)
            pairs.append(ParallelPair(src, tgt))
            made += 1
    return pairs
