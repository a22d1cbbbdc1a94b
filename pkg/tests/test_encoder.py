import math

import pytest
import torch

from verbadapt.encoder import (
    Adapter,
    AdapterStack,
    EncoderConfig,
    EncoderError,
    WordPieceTokenizer,
    build_tiny_desk_encoder,
    insert_adapters,
    load_adapter_checkpoint,
    load_encoder,
    parameter_digest,
    remove_verb_adapters,
    save_adapter_checkpoint,
    save_encoder,
    set_freezing,
    stack_task_adapter,
    trainable_parameter_count,
)


class TestTokenizer:
    def test_build_includes_specials_and_chars(self):
        tok = WordPieceTokenizer.build(["walk"])
        for sp in ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"):
            assert sp in tok.index
        assert "walk" in tok.index and "w" in tok.index and "##w" in tok.index

    def test_greedy_longest_match(self):
        tok = WordPieceTokenizer.build(["walk"])
        assert tok.wordpieces("walk") == ["walk"]
        assert tok.wordpieces("walks") == ["walk", "##s"]

    def test_unknown_character_yields_unk(self):
        tok = WordPieceTokenizer.build(["walk"])
        assert tok.wordpieces("日本") == ["[UNK]"]

    def test_unseen_ascii_word_falls_back_to_chars(self):
        tok = WordPieceTokenizer.build(["walk"])
        pieces = tok.wordpieces("zag")
        assert pieces[0] == "z" and all(p.startswith("##") for p in pieces[1:])

    def test_missing_special_rejected(self):
        with pytest.raises(EncoderError):
            WordPieceTokenizer(["a", "b"])


class TestAdapter:
    def test_reduction_must_divide_hidden(self):
        with pytest.raises(EncoderError):
            Adapter(8, 3)

    def test_unknown_init(self):
        with pytest.raises(EncoderError):
            Adapter(8, 2, init="xavier")

    def test_shape_mismatch(self):
        a = Adapter(8, 2)
        with pytest.raises(EncoderError):
            a(torch.zeros(2, 8), torch.zeros(3, 8))

    def test_near_zero_up_is_exact_identity_on_residual(self):
        a = Adapter(8, 2, init="near-zero-up")
        h, r = torch.randn(4, 8), torch.randn(4, 8)
        assert torch.equal(a(h, r), r)

    def test_parameter_count_at_full_scale(self):
        # h=768, reduction 16 -> bottleneck 48; 2*768*48 weights + 48 + 768 biases
        a = Adapter(768, 16)
        assert sum(p.numel() for p in a.parameters()) == 74544
        assert a.bottleneck == 48


class TestPassThrough:
    def test_inserted_adapters_leave_outputs_unchanged(self, small_encoder):
        ids = torch.tensor([[2, 5, 6, 3]])
        with torch.no_grad():
            base = small_encoder(ids)
            stack = insert_adapters(small_encoder, reduction=2, init="near-zero-up", seed=0)
            adapted = stack(ids)
        assert float((base - adapted).abs().max()) < 1e-6

    def test_random_init_changes_outputs(self, small_encoder):
        ids = torch.tensor([[2, 5, 6, 3]])
        with torch.no_grad():
            base = small_encoder(ids)
            stack = insert_adapters(small_encoder, reduction=2, init="random", seed=0)
            diff = float((base - stack(ids)).abs().max())
        assert diff > 0

    def test_stacked_task_adapter_also_passes_through(self, small_encoder):
        ids = torch.tensor([[2, 5, 6, 3]])
        with torch.no_grad():
            base = small_encoder(ids)
            stack = insert_adapters(small_encoder, reduction=2, seed=0)
            stack_task_adapter(stack, reduction=2, seed=1)
            diff = float((base - stack(ids)).abs().max())
        assert diff < 1e-6


class TestAdapterGradients:
    def test_gradients_match_finite_differences(self):
        torch.manual_seed(0)
        a = Adapter(8, 2, init="random").double()
        h = torch.randn(3, 8, dtype=torch.float64)
        r = torch.randn(3, 8, dtype=torch.float64)
        w = torch.randn(3, 8, dtype=torch.float64)

        def loss_fn():
            with torch.no_grad():
                return float((a(h, r) * w).sum())

        loss = (a(h, r) * w).sum()
        loss.backward()
        eps = 1e-6
        for p in a.parameters():
            g = p.grad.flatten()
            flat = p.data.flatten()
            for idx in range(0, flat.numel(), max(1, flat.numel() // 5)):
                orig = float(flat[idx])
                flat[idx] = orig + eps
                up = loss_fn()
                flat[idx] = orig - eps
                down = loss_fn()
                flat[idx] = orig
                fd = (up - down) / (2 * eps)
                denom = max(abs(fd), abs(float(g[idx])), 1e-8)
                assert abs(fd - float(g[idx])) / denom < 1e-4


class TestStackAndRegimes:
    def test_one_adapter_per_layer(self, small_encoder):
        stack = insert_adapters(small_encoder, reduction=2)
        assert len(stack.verb_adapters) == small_encoder.cfg.num_layers

    def test_unsupported_placement(self, small_encoder):
        with pytest.raises(EncoderError):
            insert_adapters(small_encoder, placement="pre-attn")

    def test_task_adapter_requires_verb_slot(self, small_encoder):
        stack = AdapterStack(small_encoder)
        with pytest.raises(EncoderError):
            stack_task_adapter(stack)

    def test_task_adapter_only_once(self, small_encoder):
        stack = insert_adapters(small_encoder, reduction=2)
        stack_task_adapter(stack, reduction=2)
        with pytest.raises(EncoderError):
            stack_task_adapter(stack, reduction=2)

    def test_remove_verb_adapters_restores_baseline(self, small_encoder):
        ids = torch.tensor([[2, 5, 3]])
        stack = insert_adapters(small_encoder, reduction=2, init="random")
        remove_verb_adapters(stack)
        with torch.no_grad():
            assert torch.equal(stack(ids), small_encoder(ids))

    def test_fft_unfreezes_encoder_and_verb(self, small_encoder):
        stack = insert_adapters(small_encoder, reduction=2)
        flags = set_freezing(stack, "FFT")
        assert flags["encoder"] and flags["verb_adapter"]
        assert all(p.requires_grad for p in stack.encoder.parameters())

    def test_ta_freezes_encoder_and_verb(self, small_encoder):
        stack = insert_adapters(small_encoder, reduction=2)
        stack_task_adapter(stack, reduction=2)
        flags = set_freezing(stack, "TA")
        assert not flags["encoder"] and not flags["verb_adapter"] and flags["task_adapter"]
        assert not any(p.requires_grad for p in stack.encoder.parameters())
        assert all(p.requires_grad for p in stack.task_adapters.parameters())

    def test_ta_without_task_adapter_is_error(self, small_encoder):
        stack = insert_adapters(small_encoder, reduction=2)
        with pytest.raises(EncoderError):
            set_freezing(stack, "TA")

    def test_unknown_regime(self, small_encoder):
        stack = insert_adapters(small_encoder, reduction=2)
        with pytest.raises(EncoderError):
            set_freezing(stack, "full")

    def test_halved_reduction_doubles_trainable_adapter_params(self, small_encoder):
        h, L = small_encoder.cfg.hidden, small_encoder.cfg.num_layers
        s1 = insert_adapters(small_encoder, reduction=4)
        stack_task_adapter(s1, reduction=4)
        set_freezing(s1, "TA")
        n1 = trainable_parameter_count(s1)
        s2 = AdapterStack(small_encoder)
        s2.verb_adapters = s1.verb_adapters
        stack_task_adapter(s2, reduction=2)
        set_freezing(s2, "2TA")
        n2 = trainable_parameter_count(s2)
        assert abs(n2 - 2 * n1) <= L * h  # up-projection bias rounding


class TestSerialization:
    def test_digest_is_stable_and_sensitive(self, small_tokenizer):
        a = build_tiny_desk_encoder(small_tokenizer, hidden=8, heads=2, seed=0)
        b = build_tiny_desk_encoder(small_tokenizer, hidden=8, heads=2, seed=0)
        assert parameter_digest(a) == parameter_digest(b)
        with torch.no_grad():
            b.tok_embed.weight[0, 0] += 1.0
        assert parameter_digest(a) != parameter_digest(b)

    def test_encoder_round_trip(self, tmp_path, small_encoder):
        f = tmp_path / "enc.pt"
        save_encoder(f, small_encoder)
        loaded = load_encoder(f)
        assert parameter_digest(loaded) == parameter_digest(small_encoder)
        assert loaded.tokenizer.vocab == small_encoder.tokenizer.vocab

    def test_adapter_checkpoint_round_trip(self, tmp_path, small_encoder):
        stack = insert_adapters(small_encoder, reduction=2, init="random", seed=7)
        f = tmp_path / "ad.pt"
        save_adapter_checkpoint(f, stack.verb_adapters, resource="toy", language="en",
                                reduction=2, hidden=8)
        adapters, meta = load_adapter_checkpoint(f, small_encoder)
        assert meta["resource"] == "toy" and meta["reduction"] == 2
        assert parameter_digest(adapters) == parameter_digest(stack.verb_adapters)

    def test_checkpoint_hidden_mismatch(self, tmp_path, small_encoder, small_tokenizer):
        stack = insert_adapters(small_encoder, reduction=2)
        f = tmp_path / "ad.pt"
        save_adapter_checkpoint(f, stack.verb_adapters, resource="toy", language="en",
                                reduction=2, hidden=8)
        other = build_tiny_desk_encoder(small_tokenizer, hidden=16, heads=2, seed=0)
        with pytest.raises(EncoderError):
            load_adapter_checkpoint(f, other)


class TestEncoderShape:
    def test_hidden_divisible_by_heads(self):
        with pytest.raises(EncoderError):
            EncoderConfig(hidden=10, heads=4)

    def test_max_len_enforced(self, small_encoder):
        with pytest.raises(EncoderError):
            small_encoder(torch.zeros((1, 33), dtype=torch.long))

    def test_seeded_embeddings_have_norm_sqrt_hidden(self, small_tokenizer, small_space):
        enc = build_tiny_desk_encoder(small_tokenizer, hidden=8, heads=2, seed=0,
                                      embedding_space=small_space)
        word = small_space.vocabulary[0]
        row = enc.tok_embed.weight[small_tokenizer.index[word]].detach()
        assert float(row.norm()) == pytest.approx(math.sqrt(8), rel=1e-5)
