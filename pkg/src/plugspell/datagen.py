"""Pseudo training data from term lexicons: confusion corruption + noise padding.

Construction is two-step. First, a term keeps its spelling with probability
p_keep; otherwise exactly one position is replaced, by [MASK] / a confusion
candidate / a random character with probabilities p_mask / p_confuse /
p_random (a character with no confusion entry diverts its confusion mass to
the random branch). Second, identical random context characters are added
before and after both input and label, which is what trains the plugin to
copy unfamiliar context through unchanged.

Everything is driven by numpy Generators; per-term sub-seeds make the output
independent of how the term loop might be parallelized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .text import (MASK_GLYPH, NUM_SPECIALS, CharVocab, ConfusionSet, Lexicon,
                   ParallelPair, Sentence, encode_text, nfc, read_utf8_lines)

logger = logging.getLogger(__name__)

_SHUFFLE_STREAM = 1


@dataclass
class CorruptionConfig:
    p_keep: float = 0.20
    p_mask: float = 0.30
    p_confuse: float = 0.50
    p_random: float = 0.20
    pad_len_min: int = 3
    pad_len_max: int = 8
    variants_per_term: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_keep <= 1.0:
            raise ValueError("p_keep must be in [0, 1]")
        if abs(self.p_mask + self.p_confuse + self.p_random - 1.0) > 1e-9:
            raise ValueError("p_mask + p_confuse + p_random must sum to 1")
        if min(self.p_mask, self.p_confuse, self.p_random) < 0:
            raise ValueError("branch probabilities must be non-negative")
        if not 0 <= self.pad_len_min <= self.pad_len_max:
            raise ValueError("need 0 <= pad_len_min <= pad_len_max")
        if self.variants_per_term < 1:
            raise ValueError("variants_per_term must be >= 1")


@dataclass(frozen=True)
class PseudoSample:
    input: Sentence
    label: Sentence

    def __post_init__(self):
        if len(self.input) != len(self.label):
            raise ValueError("input/label length mismatch")


def _random_char(vocab: CharVocab, rng: np.random.Generator, exclude: str | None = None) -> str:
    """Uniform non-special vocab character, optionally excluding one."""
    pool = vocab.size - NUM_SPECIALS
    if exclude is not None and pool < 2:
        raise ValueError("vocab too small to draw a replacement character")
    while True:
        ch = vocab.char_of(NUM_SPECIALS + int(rng.integers(pool)))
        if ch != exclude:
            return ch


def corrupt_term(term: Sentence, conf: ConfusionSet, cfg: CorruptionConfig,
                 vocab: CharVocab, rng: np.random.Generator) -> tuple[Sentence, Sentence]:
    """Returns (input, label); label is always the term itself."""
    if len(term) < 1:
        raise ValueError("empty term")
    if rng.random() < cfg.p_keep:
        return term, term
    pos = int(rng.integers(len(term)))
    original = term.chars[pos]
    u = rng.random()
    if u < cfg.p_mask:
        repl = MASK_GLYPH
    else:
        cands = conf.candidates(original)
        if u < cfg.p_mask + cfg.p_confuse and cands:
            repl = cands[int(rng.integers(len(cands)))]
        else:
            # random branch, plus the fallback for characters without
            # confusion entries
            repl = _random_char(vocab, rng, exclude=original)
    corrupted = term.chars[:pos] + repl + term.chars[pos + 1:]
    return encode_text(vocab, corrupted), term


def pad_with_context_noise(inp: Sentence, label: Sentence, cfg: CorruptionConfig,
                           vocab: CharVocab, rng: np.random.Generator) -> tuple[Sentence, Sentence]:
    """Prepend/append the same random context to both sides of the pair.

    Prefix and suffix lengths are drawn independently from
    U[pad_len_min, pad_len_max]; characters come from the non-special vocab.
    """
    if len(inp) != len(label):
        raise ValueError("input/label length mismatch")
    n_pre = int(rng.integers(cfg.pad_len_min, cfg.pad_len_max + 1))
    n_suf = int(rng.integers(cfg.pad_len_min, cfg.pad_len_max + 1))
    prefix = "".join(_random_char(vocab, rng) for _ in range(n_pre))
    suffix = "".join(_random_char(vocab, rng) for _ in range(n_suf))
    if not prefix and not suffix:
        return inp, label
    return (encode_text(vocab, prefix + inp.chars + suffix),
            encode_text(vocab, prefix + label.chars + suffix))


def term_rng(seed: int, term_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0, term_index)))


def build_pseudo_dataset(lexicon: Lexicon, conf: ConfusionSet, cfg: CorruptionConfig,
                         vocab: CharVocab) -> list[PseudoSample]:
    """variants_per_term corrupted+padded samples per term, seed-shuffled."""
    if len(lexicon) == 0:
        raise ValueError("empty lexicon")
    samples: list[PseudoSample] = []
    for idx, term in enumerate(lexicon):
        rng = term_rng(cfg.seed, idx)
        sent = encode_text(vocab, term)
        for _ in range(cfg.variants_per_term):
            inp, lab = corrupt_term(sent, conf, cfg, vocab, rng)
            inp, lab = pad_with_context_noise(inp, lab, cfg, vocab, rng)
            samples.append(PseudoSample(inp, lab))
    shuffle = np.random.default_rng(np.random.SeedSequence(entropy=(cfg.seed, _SHUFFLE_STREAM)))
    order = shuffle.permutation(len(samples))
    return [samples[i] for i in order]


def save_pseudo_tsv(samples: list[PseudoSample], path, seed: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#seed={seed}\n")
        for s in samples:
            fh.write(f"{s.input.chars}\t{s.label.chars}\n")


def load_pseudo_tsv(path, vocab: CharVocab) -> list[PseudoSample]:
    samples = []
    for pair in load_pairs_tsv(path, vocab):
        samples.append(PseudoSample(pair.source, pair.target))
    return samples


def load_pairs_tsv(path, vocab: CharVocab) -> list[ParallelPair]:
    """Read "source<TAB>target" lines; '#' comments and blank lines skipped."""
    pairs = []
    for num, line in enumerate(read_utf8_lines(path), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}: line {num}: expected 'source<TAB>target'")
        src, tgt = nfc(parts[0]), nfc(parts[1])
        if len(src) != len(tgt):
            raise ValueError(f"{path}: line {num}: source/target lengths differ")
        pairs.append(ParallelPair(encode_text(vocab, src), encode_text(vocab, tgt)))
    return pairs


def save_pairs_tsv(pairs: list[ParallelPair], path, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"#{comment}\n")
        for p in pairs:
            fh.write(f"{p.source.chars}\t{p.target.chars}\n")
