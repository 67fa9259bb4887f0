"""
Tiny GPT-style causal transformer on top of the numpy autodiff.

Pre-norm blocks (attention then MLP, each with a residual connection), learned
position embeddings and an output projection tied to the token embedding.
"""
import logging
from collections import OrderedDict
from typing import Dict, List, Sequence

import numpy as np

from ..models.config_models import ModelConfig
from ..models.exceptions import ContextOverflowError
from .autodiff import Tensor, embedding, gelu, layer_norm, log_softmax, masked_softmax, no_grad, parameter

logger = logging.getLogger(__name__)


class CausalTransformer:
    """Parameter set plus forward pass; the same class backs the DS and the GUS."""

    def __init__(self, config: ModelConfig, vocab_size: int, seed: int = 0, pad_id: int = 0):
        self.config = config
        self.vocab_size = vocab_size
        self.pad_id = pad_id
        self.params: Dict[str, Tensor] = OrderedDict()
        self._init_params(np.random.default_rng(seed))
        logger.info(
            f"Initialized transformer: {config.n_layer} layers, {config.n_head} heads, "
            f"width {config.n_embd}, {self.num_parameters()} parameters"
        )

    @property
    def context_length(self) -> int:
        return self.config.context_length

    def _init_params(self, rng: np.random.Generator) -> None:
        c, std = self.config.n_embd, self.config.init_std
        proj_std = std / np.sqrt(2 * self.config.n_layer)

        def normal(name, shape, scale=std):
            self.params[name] = parameter(rng.normal(0.0, scale, size=shape), name)

        def const(name, shape, value):
            self.params[name] = parameter(np.full(shape, value, dtype=np.float64), name)

        normal("wte", (self.vocab_size, c))
        normal("wpe", (self.config.context_length, c))
        for i in range(self.config.n_layer):
            p = f"h.{i}."
            const(p + "ln_1.weight", (c,), 1.0)
            const(p + "ln_1.bias", (c,), 0.0)
            normal(p + "attn.c_attn.weight", (c, 3 * c))
            const(p + "attn.c_attn.bias", (3 * c,), 0.0)
            normal(p + "attn.c_proj.weight", (c, c), proj_std)
            const(p + "attn.c_proj.bias", (c,), 0.0)
            const(p + "ln_2.weight", (c,), 1.0)
            const(p + "ln_2.bias", (c,), 0.0)
            normal(p + "mlp.c_fc.weight", (c, 4 * c))
            const(p + "mlp.c_fc.bias", (4 * c,), 0.0)
            normal(p + "mlp.c_proj.weight", (4 * c, c), proj_std)
            const(p + "mlp.c_proj.bias", (c,), 0.0)
        const("ln_f.weight", (c,), 1.0)
        const("ln_f.bias", (c,), 0.0)

    # ------------------------------------------------------------------
    # parameters
    # ------------------------------------------------------------------

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def all_finite(self) -> bool:
        return all(np.isfinite(p.data).all() for p in self.params.values())

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        unexpected = set(state) - set(self.params)
        if missing or unexpected:
            raise ValueError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, p in self.params.items():
            if state[name].shape != p.shape:
                raise ValueError(f"shape mismatch for {name}: {state[name].shape} vs {p.shape}")
            p.data = np.array(state[name], dtype=np.float64, copy=True)

    # ------------------------------------------------------------------
    # forward
    # ------------------------------------------------------------------

    def _attention(self, x: Tensor, i: int, mask: np.ndarray) -> Tensor:
        p = f"h.{i}.attn."
        b, t, c = x.shape
        h = self.config.n_head
        d = c // h
        qkv = x @ self.params[p + "c_attn.weight"] + self.params[p + "c_attn.bias"]

        def heads(part: Tensor) -> Tensor:
            return part.reshape(b, t, h, d).transpose(0, 2, 1, 3)

        q = heads(qkv[..., :c])
        k = heads(qkv[..., c:2 * c])
        v = heads(qkv[..., 2 * c:])
        att = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(d))
        att = masked_softmax(att, mask)
        y = (att @ v).transpose(0, 2, 1, 3).reshape(b, t, c)
        return y @ self.params[p + "c_proj.weight"] + self.params[p + "c_proj.bias"]

    def _mlp(self, x: Tensor, i: int) -> Tensor:
        p = f"h.{i}.mlp."
        hidden = gelu(x @ self.params[p + "c_fc.weight"] + self.params[p + "c_fc.bias"])
        return hidden @ self.params[p + "c_proj.weight"] + self.params[p + "c_proj.bias"]

    def forward(self, ids: np.ndarray) -> Tensor:
        """Logits of shape (B, T, V) for integer ids of shape (B, T)."""
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim == 1:
            ids = ids[None, :]
        b, t = ids.shape
        if t > self.config.context_length:
            raise ContextOverflowError(t, self.config.context_length)
        mask = np.tril(np.ones((t, t), dtype=bool))
        x = embedding(self.params["wte"], ids) + embedding(self.params["wpe"], np.arange(t))
        for i in range(self.config.n_layer):
            p = f"h.{i}."
            x = x + self._attention(layer_norm(x, self.params[p + "ln_1.weight"], self.params[p + "ln_1.bias"]), i, mask)
            x = x + self._mlp(layer_norm(x, self.params[p + "ln_2.weight"], self.params[p + "ln_2.bias"]), i)
        x = layer_norm(x, self.params["ln_f.weight"], self.params["ln_f.bias"])
        return x @ self.params["wte"].transpose(1, 0)

    def probabilities(self, ids: np.ndarray) -> np.ndarray:
        with no_grad():
            return np.exp(log_softmax(self.forward(ids).data))

    # ------------------------------------------------------------------
    # step interface used by decoding
    # ------------------------------------------------------------------

    def pad_batch(self, sequences: Sequence[Sequence[int]]) -> np.ndarray:
        width = max(len(s) for s in sequences)
        batch = np.full((len(sequences), width), self.pad_id, dtype=np.int64)
        for row, seq in enumerate(sequences):
            batch[row, :len(seq)] = seq
        return batch

    def next_token_log_probs(self, sequences: Sequence[Sequence[int]]) -> np.ndarray:
        """Log distribution over the next token after each (non-empty) sequence."""
        lengths = np.array([len(s) for s in sequences])
        if (lengths == 0).any():
            raise ValueError("sequences must be non-empty")
        with no_grad():
            logits = self.forward(self.pad_batch(sequences)).data
        last = logits[np.arange(len(sequences)), lengths - 1]
        return log_softmax(last)

    def log_probs_of(self, prefix: Sequence[int], continuation: Sequence[int]) -> np.ndarray:
        """log p of each continuation token given the prefix and earlier continuation tokens."""
        if not prefix:
            raise ValueError("prefix must be non-empty")
        if not continuation:
            return np.zeros(0)
        tokens = list(prefix) + list(continuation)
        with no_grad():
            logp = log_softmax(self.forward(np.asarray(tokens[:-1])[None, :]).data[0])
        positions = np.arange(len(prefix) - 1, len(tokens) - 1)
        return logp[positions, np.asarray(continuation)]
