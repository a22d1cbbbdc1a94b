"""Deterministic synthetic fixtures: verb lexica, clustered embedding spaces,
and event datasets whose labels depend on verb class.

These make the whole pipeline runnable and testable with no external
resources; class structure is planted so learnability can be verified
independently (clusters are linearly separable by construction).
"""

from __future__ import annotations

import string

import numpy as np

from .embeddings import EmbeddingSpace
from .lexicon import VerbLexicon

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _make_lemma(rng: np.random.Generator) -> str:
    syllables = rng.integers(2, 4)
    out = []
    for _ in range(syllables):
        out.append(_CONSONANTS[rng.integers(len(_CONSONANTS))])
        out.append(_VOWELS[rng.integers(len(_VOWELS))])
    return "".join(out)


def make_synthetic_lexicon(n_classes: int = 20, verbs_per_class: int = 10, seed: int = 0,
                           language: str = "en", resource_name: str = "synth") -> VerbLexicon:
    """Disjoint classes of pronounceable nonce verbs; lemmas carry no class cue."""
    rng = np.random.Generator(np.random.PCG64(seed))
    lemmas: list[str] = []
    seen: set[str] = set()
    while len(lemmas) < n_classes * verbs_per_class:
        lemma = _make_lemma(rng)
        if lemma not in seen:
            seen.add(lemma)
            lemmas.append(lemma)
    entries: dict[str, set[str]] = {}
    for c in range(n_classes):
        cid = f"class-{c:02d}"
        for lemma in lemmas[c * verbs_per_class : (c + 1) * verbs_per_class]:
            entries.setdefault(lemma, set()).add(cid)
    return VerbLexicon(entries=entries, resource_name=resource_name, language=language)


def class_of(lex: VerbLexicon, lemma: str) -> str:
    return sorted(lex.entries[lemma])[0]


def make_clustered_embeddings(lex: VerbLexicon, d: int = 10, spread: float = 0.1, seed: int = 0,
                              language: str = "en", extra_words: list[str] | None = None,
                              alignment_tag: str | None = None) -> EmbeddingSpace:
    """One well-separated cluster per class; members = center + small noise."""
    rng = np.random.Generator(np.random.PCG64(seed))
    classes = sorted({c for cids in lex.entries.values() for c in cids})
    centers = {}
    for c in classes:
        v = rng.normal(size=d)
        centers[c] = v / np.linalg.norm(v)
    vocab, rows = [], []
    for lemma in sorted(lex.entries):
        center = centers[class_of(lex, lemma)]
        vocab.append(lemma)
        rows.append(center + spread * rng.normal(size=d))
    for w in extra_words or []:
        if w not in lex.entries:
            vocab.append(w)
            rows.append(rng.normal(size=d))
    return EmbeddingSpace(vocabulary=vocab, vectors=np.vstack(rows),
                          language=language, alignment_tag=alignment_tag)


def make_filler_vocab(n: int = 30, seed: int = 99) -> list[str]:
    rng = np.random.Generator(np.random.PCG64(seed))
    out: list[str] = []
    seen = set()
    while len(out) < n:
        w = "".join(string.ascii_lowercase[rng.integers(26)] for _ in range(5))
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def make_event_sentences(
    lex: VerbLexicon,
    class_to_type: dict[str, str],
    verbs: list[str],
    n_sentences: int,
    seed: int,
    filler: list[str] | None = None,
    sentence_len: int = 8,
) -> list[tuple[list[str], list[str]]]:
    """Sentences of filler tokens with one planted verb; its label is its class's event type.

    The Bayes-optimal labeling rule needs verb-class knowledge: filler tokens
    are label-independent and each verb's type is determined by its class.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    filler = filler or make_filler_vocab()
    sentences = []
    for i in range(n_sentences):
        verb = verbs[int(rng.integers(len(verbs)))]
        pos = int(rng.integers(sentence_len))
        tokens, labels = [], []
        for j in range(sentence_len):
            if j == pos:
                tokens.append(verb)
                labels.append(class_to_type[class_of(lex, verb)])
            else:
                tokens.append(filler[int(rng.integers(len(filler)))])
                labels.append("O")
        sentences.append((tokens, labels))
    return sentences


def default_class_to_type(lex: VerbLexicon, types: list[str] | None = None) -> dict[str, str]:
    """Round-robin map from synthetic classes onto event-type labels."""
    if types is None:
        types = ["OCCURRENCE", "STATE", "REPORTING", "I-ACTION", "I-STATE", "ASPECTUAL", "PERCEPTION"]
    classes = sorted({c for cids in lex.entries.values() for c in cids})
    return {c: types[i % len(types)] for i, c in enumerate(classes)}
