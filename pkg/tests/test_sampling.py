import numpy as np
import pytest

from verbadapt.embeddings import EmbeddingSpace
from verbadapt.lexicon import ConstraintSet, VerbPair
from verbadapt.sampling import (
    DegenerateBatchError,
    SamplingConfig,
    SamplingError,
    build_training_batch,
    epoch_batches,
    nearest_in_batch,
    rank_candidates,
)


class TestSamplingConfig:
    def test_scheme_length_must_match_k(self):
        with pytest.raises(ValueError):
            SamplingConfig(k=3, scheme="cc")

    def test_scheme_alphabet(self):
        with pytest.raises(ValueError):
            SamplingConfig(k=2, scheme="cx")

    def test_at_most_two_controlled(self):
        with pytest.raises(ValueError):
            SamplingConfig(k=3, scheme="ccc")

    def test_minimum_batch(self):
        with pytest.raises(ValueError):
            SamplingConfig(batch_positives=1)

    @pytest.mark.parametrize("k,scheme", [(2, "cc"), (3, "ccr"), (4, "ccrr")])
    def test_supported_grid(self, k, scheme):
        SamplingConfig(k=k, scheme=scheme)


class TestRanking:
    def test_rank_orders_by_cosine_then_lemma(self):
        sp = EmbeddingSpace(vocabulary=["t", "x", "y", "z"],
                            vectors=np.array([[1, 0], [1, 0.01], [0.5, 0.5], [1, 0.01]], dtype=float))
        ranked = rank_candidates("t", ["x", "y", "z"], sp)
        assert ranked == ["x", "z", "y"]  # x and z tie on cosine; lemma breaks it

    def test_nearest_skips_out_of_space(self):
        sp = EmbeddingSpace(vocabulary=["t", "y"], vectors=np.array([[1, 0], [0.5, 0.5]], dtype=float))
        assert nearest_in_batch("t", ["missing", "y"], sp) == "y"

    def test_target_out_of_space_has_no_candidates(self):
        sp = EmbeddingSpace(vocabulary=["y"], vectors=np.array([[1, 0]], dtype=float))
        assert rank_candidates("t", ["y"], sp) == []


def brute_force_controlled(anchor, pool, space, other_member, global_positives):
    """Independent oracle: best in-space candidate by cosine (lemma tie-break)
    whose pair with the kept member is not a global positive."""
    scored = []
    for c in sorted(set(pool)):
        if c not in space or anchor not in space:
            continue
        sim = float(space.unit_vector(c) @ space.unit_vector(anchor))
        scored.append((-sim, c))
    for _, c in sorted(scored):
        if (c, other_member) not in global_positives:
            return c
    return None


@pytest.fixture()
def toy_setup():
    verbs = [f"v{i}" for i in range(8)]
    rng = np.random.Generator(np.random.PCG64(3))
    space = EmbeddingSpace(vocabulary=verbs, vectors=rng.normal(size=(8, 4)))
    positives = [VerbPair("v0", "v1"), VerbPair("v2", "v3"), VerbPair("v4", "v5"), VerbPair("v6", "v7")]
    return verbs, space, ConstraintSet(set(positives)), positives


class TestBatchComposition:
    def test_structure_and_labels(self, toy_setup):
        _, space, cs, positives = toy_setup
        cfg = SamplingConfig(k=3, scheme="ccr", batch_positives=4)
        rng = np.random.Generator(np.random.PCG64(0))
        batch = build_training_batch(positives, cs, space, cfg, rng)
        assert len(batch) == 4 * (1 + 3)
        assert [lbl for _, lbl in batch.instances[:4]] == [1, 1, 1, 1]
        assert all(lbl == 0 for _, lbl in batch.instances[4:])
        assert batch.provenance[:4] == ["positive"] * 4
        assert batch.provenance[4:8] == ["controlled-1"] * 4
        assert batch.provenance[8:12] == ["controlled-2"] * 4
        assert batch.provenance[12:] == ["random"] * 4

    def test_no_negative_is_global_positive(self, toy_setup):
        _, space, cs, positives = toy_setup
        cfg = SamplingConfig(k=3, scheme="ccr", batch_positives=4)
        batch = build_training_batch(positives, cs, space, cfg,
                                     np.random.Generator(np.random.PCG64(1)))
        for (pair, lbl) in batch.instances:
            if lbl == 0:
                assert pair not in cs

    def test_controlled_matches_brute_force(self, toy_setup):
        _, space, cs, positives = toy_setup
        cfg = SamplingConfig(k=2, scheme="cc", batch_positives=4)
        batch = build_training_batch(positives, cs, space, cfg,
                                     np.random.Generator(np.random.PCG64(2)))
        lemmas = sorted({l for p in positives for l in (p.first, p.second)})
        for i, pos in enumerate(positives):
            pool = [c for c in lemmas if c not in (pos.first, pos.second)]
            exp1 = brute_force_controlled(pos.second, pool, space, pos.second, cs)
            exp2 = brute_force_controlled(pos.first, pool, space, pos.first, cs)
            got1 = batch.instances[4 + i][0]
            got2 = batch.instances[8 + i][0]
            assert got1 == VerbPair(exp1, pos.second).canonical()
            assert got2 == VerbPair(pos.first, exp2).canonical()

    def test_out_of_space_positive_falls_back_to_random(self, toy_setup):
        verbs, space, cs, positives = toy_setup
        oov = [VerbPair("zz1", "zz2")] + positives[:3]
        cs2 = ConstraintSet(set(oov))
        cfg = SamplingConfig(k=2, scheme="cc", batch_positives=4)
        batch = build_training_batch(oov, cs2, space, cfg,
                                     np.random.Generator(np.random.PCG64(4)))
        # the OOV positive's controlled slots degrade to random (counted)
        assert batch.fallback_count == 2
        assert batch.provenance.count("random") >= 2

    def test_degenerate_batch_rejected(self, toy_setup):
        _, space, cs, _ = toy_setup
        cfg = SamplingConfig(k=2, scheme="cc", batch_positives=2)
        with pytest.raises(DegenerateBatchError):
            build_training_batch([VerbPair("v0", "v1")] * 2, cs, space, cfg,
                                 np.random.Generator(np.random.PCG64(0)))

    def test_wrong_positive_count(self, toy_setup):
        _, space, cs, positives = toy_setup
        cfg = SamplingConfig(k=2, scheme="cc", batch_positives=8)
        with pytest.raises(SamplingError):
            build_training_batch(positives, cs, space, cfg,
                                 np.random.Generator(np.random.PCG64(0)))


class TestEpochBatches:
    def test_deterministic_per_seed_and_epoch(self, small_constraints, small_space):
        cfg = SamplingConfig(k=2, scheme="cc", batch_positives=4, seed=11)
        a = [b.instances for b in epoch_batches(small_constraints, small_space, cfg, epoch=1)]
        b = [b.instances for b in epoch_batches(small_constraints, small_space, cfg, epoch=1)]
        assert a == b

    def test_epochs_differ(self, small_constraints, small_space):
        cfg = SamplingConfig(k=2, scheme="cc", batch_positives=4, seed=11)
        a = [b.instances for b in epoch_batches(small_constraints, small_space, cfg, epoch=0)]
        b = [b.instances for b in epoch_batches(small_constraints, small_space, cfg, epoch=1)]
        assert a != b

    def test_remainder_dropped(self, small_constraints, small_space):
        cfg = SamplingConfig(k=2, scheme="cc", batch_positives=5, seed=0)
        n = len(list(epoch_batches(small_constraints, small_space, cfg)))
        assert n == len(small_constraints) // 5

    def test_too_few_constraints(self, small_constraints, small_space):
        cfg = SamplingConfig(k=2, scheme="cc", batch_positives=len(small_constraints) + 1)
        with pytest.raises(SamplingError):
            list(epoch_batches(small_constraints, small_space, cfg))

    def test_dump_tsv_four_columns(self, tmp_path, small_constraints, small_space):
        cfg = SamplingConfig(k=2, scheme="cc", batch_positives=4, seed=0)
        batch = next(iter(epoch_batches(small_constraints, small_space, cfg)))
        f = tmp_path / "batch.tsv"
        batch.dump_tsv(f)
        lines = f.read_text().splitlines()
        assert len(lines) == len(batch)
        assert all(len(l.split("\t")) == 4 for l in lines)
