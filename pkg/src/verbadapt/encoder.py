"""Transformer encoder host, WordPiece-style tokenizer, and bottleneck adapters.

The bundled tiny encoder makes every pipeline runnable offline at toy scale;
real pretrained checkpoints can be loaded through the same named-parameter
archive format (``flavor='pretrained-external'``).

Adapter wiring per layer (single adapter after the feed-forward sub-layer):
    a   = U(GeLU(D(h))) + r
with r the feed-forward output and h the post-layer-norm hidden state
LN(r + attn_out); the layer then re-applies LN(a + attn_out). A zero
up-projection therefore reproduces the unadapted encoder exactly. A task
adapter, when stacked, consumes the verb adapter's output the same way.
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, asdict

import torch
import torch.nn as nn

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIALS = [PAD, UNK, CLS, SEP, MASK]

REGIMES = ("FFT", "TA", "2TA")


class EncoderError(Exception):
    pass


class WordPieceTokenizer:
    """Greedy longest-match subword tokenizer with ## continuation pieces."""

    def __init__(self, vocab: list[str]):
        self.vocab = list(vocab)
        self.index = {tok: i for i, tok in enumerate(self.vocab)}
        for sp in SPECIALS:
            if sp not in self.index:
                raise EncoderError(f"tokenizer vocab missing special token {sp}")

    @classmethod
    def build(cls, words, keep_whole: bool = True) -> "WordPieceTokenizer":
        """Build a vocab from a word list: whole words plus character fallbacks."""
        vocab = list(SPECIALS)
        seen = set(vocab)
        chars = set("abcdefghijklmnopqrstuvwxyz0123456789.,-'")
        for w in sorted(set(words)):
            chars.update(w.lower())
            if keep_whole and w not in seen:
                vocab.append(w)
                seen.add(w)
        for ch in sorted(chars):
            for piece in (ch, "##" + ch):
                if piece not in seen:
                    vocab.append(piece)
                    seen.add(piece)
        return cls(vocab)

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def cls_id(self) -> int:
        return self.index[CLS]

    @property
    def sep_id(self) -> int:
        return self.index[SEP]

    def wordpieces(self, word: str) -> list[str]:
        pieces = []
        start = 0
        while start < len(word):
            end = len(word)
            prefix = "##" if start > 0 else ""
            while end > start:
                cand = prefix + word[start:end]
                if cand in self.index:
                    pieces.append(cand)
                    break
                end -= 1
            else:
                return [UNK]
            start = end
        return pieces

    def encode_word(self, word: str) -> list[int]:
        return [self.index[p] for p in self.wordpieces(word)]

    def __len__(self) -> int:
        return len(self.vocab)


@dataclass
class EncoderConfig:
    num_layers: int = 2
    hidden: int = 32
    heads: int = 4
    ffn_dim: int = 64
    max_len: int = 128
    vocab_size: int = 0
    flavor: str = "tiny-desk"

    def __post_init__(self):
        if self.hidden % self.heads != 0:
            raise EncoderError(f"hidden size {self.hidden} not divisible by {self.heads} heads")


class Adapter(nn.Module):
    """Bottleneck module: down-projection, exact GeLU, up-projection, residual add."""

    def __init__(self, hidden: int, reduction: int, init: str = "near-zero-up",
                 generator: torch.Generator | None = None):
        super().__init__()
        if hidden % reduction != 0:
            raise EncoderError(f"reduction factor {reduction} does not divide hidden size {hidden}")
        self.reduction = reduction
        m = hidden // reduction
        self.down = nn.Linear(hidden, m)
        self.act = nn.GELU(approximate="none")
        self.up = nn.Linear(m, hidden)
        with torch.no_grad():
            self.down.weight.normal_(0.0, 0.02, generator=generator)
            self.down.bias.zero_()
            if init == "near-zero-up":
                self.up.weight.zero_()
            elif init == "random":
                self.up.weight.normal_(0.0, 0.02, generator=generator)
            else:
                raise EncoderError(f"unknown adapter init {init!r}")
            self.up.bias.zero_()

    @property
    def bottleneck(self) -> int:
        return self.down.out_features

    def forward(self, h: torch.Tensor, r: torch.Tensor) -> torch.Tensor:
        if h.shape != r.shape:
            raise EncoderError(f"adapter input shapes differ: {tuple(h.shape)} vs {tuple(r.shape)}")
        return self.up(self.act(self.down(h))) + r


def adapter_forward(h: torch.Tensor, r: torch.Tensor, adapter: Adapter) -> torch.Tensor:
    return adapter(h, r)


class EncoderLayer(nn.Module):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        h = cfg.hidden
        self.heads = cfg.heads
        self.head_dim = h // cfg.heads
        self.qkv = nn.Linear(h, 3 * h)
        self.attn_out = nn.Linear(h, h)
        self.ln1 = nn.LayerNorm(h)
        self.ffn_in = nn.Linear(h, cfg.ffn_dim)
        self.ffn_act = nn.GELU(approximate="none")
        self.ffn_out = nn.Linear(cfg.ffn_dim, h)
        self.ln2 = nn.LayerNorm(h)

    def attention(self, x: torch.Tensor, pad_mask: torch.Tensor | None) -> torch.Tensor:
        B, T, H = x.shape
        qkv = self.qkv(x).view(B, T, 3, self.heads, self.head_dim).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        scores = (q @ k.transpose(-1, -2)) / math.sqrt(self.head_dim)
        if pad_mask is not None:
            scores = scores.masked_fill(pad_mask[:, None, None, :] == 0, float("-inf"))
        probs = torch.softmax(scores, dim=-1)
        ctx = (probs @ v).transpose(1, 2).reshape(B, T, H)
        return self.attn_out(ctx)

    def forward(self, x, pad_mask=None, verb_adapter: Adapter | None = None,
                task_adapter: Adapter | None = None):
        h1 = self.ln1(x + self.attention(x, pad_mask))
        r = self.ffn_out(self.ffn_act(self.ffn_in(h1)))
        if verb_adapter is not None:
            r = verb_adapter(self.ln2(h1 + r), r)
        if task_adapter is not None:
            r = task_adapter(self.ln2(h1 + r), r)
        return self.ln2(h1 + r)


class Encoder(nn.Module):
    """Host transformer; adapters are injected per layer via an AdapterStack."""

    def __init__(self, cfg: EncoderConfig, tokenizer: WordPieceTokenizer, seed: int = 0):
        super().__init__()
        cfg.vocab_size = len(tokenizer)
        self.cfg = cfg
        self.tokenizer = tokenizer
        self.tok_embed = nn.Embedding(cfg.vocab_size, cfg.hidden)
        self.pos_embed = nn.Embedding(cfg.max_len, cfg.hidden)
        self.embed_ln = nn.LayerNorm(cfg.hidden)
        self.layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.num_layers))
        # from-scratch toy init: unit-scale embeddings and fan-in scaled linears
        # keep the random features input-dependent at small hidden sizes
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for name, p in self.named_parameters():
                if "embed" in name and p.dim() == 2:
                    p.normal_(0.0, 1.0, generator=gen)
                elif p.dim() >= 2:
                    p.normal_(0.0, 1.0 / math.sqrt(p.shape[1]), generator=gen)
                elif name.endswith("weight"):  # layernorm gains
                    p.fill_(1.0)
                else:
                    p.zero_()

    def forward(self, input_ids: torch.Tensor, pad_mask: torch.Tensor | None = None,
                verb_adapters=None, task_adapters=None) -> torch.Tensor:
        T = input_ids.shape[1]
        if T > self.cfg.max_len:
            raise EncoderError(f"sequence length {T} exceeds max_len {self.cfg.max_len}")
        pos = torch.arange(T, device=input_ids.device)
        x = self.embed_ln(self.tok_embed(input_ids) + self.pos_embed(pos)[None])
        for i, layer in enumerate(self.layers):
            x = layer(
                x,
                pad_mask,
                verb_adapter=verb_adapters[i] if verb_adapters is not None else None,
                task_adapter=task_adapters[i] if task_adapters is not None else None,
            )
        return x


class AdapterStack(nn.Module):
    """Encoder plus per-layer verb/task adapter slots and freeze bookkeeping."""

    def __init__(self, encoder: Encoder):
        super().__init__()
        self.encoder = encoder
        self.verb_adapters: nn.ModuleList | None = None
        self.task_adapters: nn.ModuleList | None = None
        self.verb_reduction: int | None = None
        self.task_reduction: int | None = None
        self.freeze_flags: dict[str, bool] = {}

    @property
    def hidden(self) -> int:
        return self.encoder.cfg.hidden

    def forward(self, input_ids, pad_mask=None) -> torch.Tensor:
        return self.encoder(input_ids, pad_mask,
                            verb_adapters=self.verb_adapters,
                            task_adapters=self.task_adapters)

    def parameter_groups(self) -> dict[str, list[nn.Parameter]]:
        groups = {"encoder": list(self.encoder.parameters())}
        if self.verb_adapters is not None:
            groups["verb_adapter"] = list(self.verb_adapters.parameters())
        if self.task_adapters is not None:
            groups["task_adapter"] = list(self.task_adapters.parameters())
        return groups


def insert_adapters(encoder: Encoder, reduction: int = 16, init: str = "near-zero-up",
                    placement: str = "after-ffn", seed: int = 0) -> AdapterStack:
    """Insert one verb adapter per layer after the feed-forward sub-layer."""
    if placement != "after-ffn":
        raise EncoderError(f"unsupported adapter placement {placement!r}")
    stack = AdapterStack(encoder)
    gen = torch.Generator().manual_seed(seed)
    stack.verb_adapters = nn.ModuleList(
        Adapter(encoder.cfg.hidden, reduction, init=init, generator=gen)
        for _ in range(encoder.cfg.num_layers)
    )
    stack.verb_reduction = reduction
    return stack


def stack_task_adapter(stack: AdapterStack, reduction: int = 16, seed: int = 1) -> AdapterStack:
    """Add a trainable task adapter downstream of the verb adapter in every layer."""
    if stack.verb_adapters is None:
        raise EncoderError("cannot stack a task adapter: no verb adapter slot present")
    if stack.task_adapters is not None:
        raise EncoderError("task adapter already present")
    gen = torch.Generator().manual_seed(seed)
    stack.task_adapters = nn.ModuleList(
        Adapter(stack.encoder.cfg.hidden, reduction, init="near-zero-up", generator=gen)
        for _ in range(stack.encoder.cfg.num_layers)
    )
    stack.task_reduction = reduction
    return stack


def remove_verb_adapters(stack: AdapterStack) -> AdapterStack:
    """Vanilla baseline: drop the verb adapter slot entirely."""
    stack.verb_adapters = None
    stack.verb_reduction = None
    return stack


def set_freezing(stack: AdapterStack, regime: str) -> dict[str, bool]:
    """Apply the fine-tuning regime's freeze flags.

    FFT trains encoder + verb adapter (+ head, handled by the training loop);
    TA/2TA freeze both and train only the task adapter (+ head).
    """
    if regime not in REGIMES:
        raise EncoderError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    if regime in ("TA", "2TA") and stack.task_adapters is None:
        raise EncoderError(f"regime {regime} requires a stacked task adapter")
    flags = {"encoder": regime == "FFT", "verb_adapter": regime == "FFT" and stack.verb_adapters is not None,
             "task_adapter": stack.task_adapters is not None, "heads": True}
    for p in stack.encoder.parameters():
        p.requires_grad_(flags["encoder"])
    if stack.verb_adapters is not None:
        for p in stack.verb_adapters.parameters():
            p.requires_grad_(flags["verb_adapter"])
    if stack.task_adapters is not None:
        for p in stack.task_adapters.parameters():
            p.requires_grad_(flags["task_adapter"])
    stack.freeze_flags = flags
    return flags


def trainable_parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters() if p.requires_grad)


def serialize_parameters(module: nn.Module) -> bytes:
    """Deterministic bytes of a module's named parameters (for freeze contracts)."""
    buf = io.BytesIO()
    for name, p in sorted(module.named_parameters()):
        buf.write(name.encode())
        buf.write(p.detach().cpu().numpy().tobytes())
    return buf.getvalue()


def parameter_digest(module: nn.Module) -> str:
    return hashlib.sha256(serialize_parameters(module)).hexdigest()


def save_adapter_checkpoint(path, adapters: nn.ModuleList, *, resource: str, language: str,
                            reduction: int, hidden: int, config_hash: str = "") -> None:
    torch.save(
        {
            "meta": {"resource": resource, "language": language, "reduction": reduction,
                     "hidden": hidden, "config_hash": config_hash},
            "state": adapters.state_dict(),
        },
        path,
    )


def load_adapter_checkpoint(path, encoder: Encoder) -> tuple[nn.ModuleList, dict]:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    meta = blob["meta"]
    if meta["hidden"] != encoder.cfg.hidden:
        raise EncoderError(
            f"checkpoint hidden size {meta['hidden']} does not match encoder hidden {encoder.cfg.hidden}"
        )
    adapters = nn.ModuleList(
        Adapter(encoder.cfg.hidden, meta["reduction"]) for _ in range(encoder.cfg.num_layers)
    )
    adapters.load_state_dict(blob["state"])
    return adapters, meta


def save_encoder(path, encoder: Encoder) -> None:
    torch.save({"cfg": asdict(encoder.cfg), "vocab": encoder.tokenizer.vocab,
                "state": encoder.state_dict()}, path)


def load_encoder(path) -> Encoder:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    cfg = EncoderConfig(**blob["cfg"])
    tok = WordPieceTokenizer(blob["vocab"])
    enc = Encoder(cfg, tok)
    enc.load_state_dict(blob["state"])
    return enc


def build_tiny_desk_encoder(tokenizer: WordPieceTokenizer, num_layers: int = 2, hidden: int = 32,
                            heads: int = 4, max_len: int = 128, seed: int = 0,
                            embedding_space=None) -> Encoder:
    """Construct the offline toy encoder.

    When an EmbeddingSpace is given, token embeddings for in-vocabulary whole
    words are seeded from it through a fixed random projection (the toy-scale
    stand-in for distributional pretraining); all other parameters stay at
    their random from-scratch init.
    """
    cfg = EncoderConfig(num_layers=num_layers, hidden=hidden, heads=heads,
                        ffn_dim=4 * hidden, max_len=max_len, flavor="tiny-desk")
    enc = Encoder(cfg, tokenizer, seed=seed)
    if embedding_space is not None:
        gen = torch.Generator().manual_seed(seed + 1)
        proj = torch.randn(embedding_space.d, hidden, generator=gen) / math.sqrt(embedding_space.d)
        with torch.no_grad():
            for tok, idx in tokenizer.index.items():
                if tok in embedding_space:
                    v = torch.from_numpy(embedding_space.unit_vector(tok)).to(torch.float32)
                    row = v @ proj
                    enc.tok_embed.weight[idx] = row * (math.sqrt(hidden) / row.norm())
    return enc
