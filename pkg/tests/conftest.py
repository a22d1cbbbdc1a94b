import pytest

from verbadapt.encoder import WordPieceTokenizer, build_tiny_desk_encoder
from verbadapt.lexicon import generate_positive_pairs
from verbadapt.synth import make_clustered_embeddings, make_synthetic_lexicon


@pytest.fixture(scope="session")
def small_lexicon():
    return make_synthetic_lexicon(n_classes=4, verbs_per_class=4, seed=0)


@pytest.fixture(scope="session")
def small_constraints(small_lexicon):
    return generate_positive_pairs(small_lexicon)


@pytest.fixture(scope="session")
def small_space(small_lexicon):
    return make_clustered_embeddings(small_lexicon, d=8, spread=0.1, seed=0)


@pytest.fixture(scope="session")
def small_tokenizer(small_lexicon):
    return WordPieceTokenizer.build(sorted(small_lexicon.entries))


@pytest.fixture()
def small_encoder(small_tokenizer):
    return build_tiny_desk_encoder(small_tokenizer, num_layers=2, hidden=8, heads=2,
                                   max_len=32, seed=0)
