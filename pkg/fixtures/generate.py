"""Regenerate the bundled toy fixtures (deterministic; safe to re-run).

Produces a small verb lexicon, clustered embedding spaces for a source and a
perfectly aligned pseudo-target language, and CoNLL event files for both the
token-trigger and the trigger+argument sequence tasks.
"""

from pathlib import Path

import numpy as np

from verbadapt.embeddings import EmbeddingSpace
from verbadapt.synth import (
    class_of,
    default_class_to_type,
    make_clustered_embeddings,
    make_event_sentences,
    make_filler_vocab,
    make_synthetic_lexicon,
)

HERE = Path(__file__).parent


def write_class_map(lex, path):
    classes = lex.classes()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# toy verb lexicon: one class per line\n")
        for cid in sorted(classes):
            fh.write(f"{cid}: {' '.join(sorted(classes[cid]))}\n")


def write_trigger_conll(sentences, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("-DOCSTART-\n\n")
        for tokens, labels in sentences:
            for t, l in zip(tokens, labels):
                fh.write(f"{t}\t{l}\n")
            fh.write("\n")


def write_ace_conll(lex, class_to_type, verbs, filler, n_sentences, seed, path):
    """Sentences with one trigger verb and one agent-role argument token."""
    rng = np.random.Generator(np.random.PCG64(seed))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("-DOCSTART-\n\n")
        for _ in range(n_sentences):
            length = 8
            vpos = int(rng.integers(1, length))
            apos = int(rng.integers(0, vpos))
            verb = verbs[int(rng.integers(len(verbs)))]
            ttype = class_to_type[class_of(lex, verb)]
            for j in range(length):
                tok = verb if j == vpos else filler[int(rng.integers(len(filler)))]
                trig = f"B-{ttype}" if j == vpos else "O"
                arg = "B-Agent:0" if j == apos else "_"
                fh.write(f"{tok}\t{trig}\t{arg}\n")
            fh.write("\n")


def main():
    lex = make_synthetic_lexicon(n_classes=10, verbs_per_class=6, seed=0)
    filler = make_filler_vocab(20)
    space = make_clustered_embeddings(lex, d=16, spread=0.05, seed=0,
                                      extra_words=filler, alignment_tag="toy-aligned")
    space.save_text(HERE / "embeddings_src.txt")
    # pseudo-target language: identical geometry, prefixed vocabulary
    target = EmbeddingSpace(vocabulary=[f"x{w}" for w in space.vocabulary],
                            vectors=space.vectors.copy(), language="xx",
                            alignment_tag="toy-aligned")
    target.save_text(HERE / "embeddings_tgt.txt")
    write_class_map(lex, HERE / "lexicon.txt")

    class_to_type = default_class_to_type(lex)
    verbs = sorted(lex.entries)
    train = make_event_sentences(lex, class_to_type, verbs, n_sentences=120, seed=1, filler=filler)
    test = make_event_sentences(lex, class_to_type, verbs, n_sentences=40, seed=2, filler=filler)
    write_trigger_conll(train, HERE / "triggers_train.conll")
    write_trigger_conll(test, HERE / "triggers_test.conll")
    write_ace_conll(lex, class_to_type, verbs, filler, 60, 3, HERE / "sequence_train.conll")
    write_ace_conll(lex, class_to_type, verbs, filler, 20, 4, HERE / "sequence_test.conll")
    print("fixtures written to", HERE)


if __name__ == "__main__":
    main()
