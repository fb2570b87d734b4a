"""Purely neural comparison models trained end to end on image features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data.cards import FEATURE_KEYS
from .data.glyphs import GLYPH_DIM, RANK_DIM, SUIT_DIM
from .dataset import Dataset
from .errors import ShapeError
from .nn import PROB_EPS, AdamState, Evaluation, NeuralNet, adam_step, init_net
from .seeding import derive_seed

SYMBOLIC_KEY = "symbolic"
TRUNK_HIDDEN = (64, 32)
TABULAR_ENCODER = (16,)
CARD_ENCODER = (32, 16, 8)
DECODER_HIDDEN = (16,)


@dataclass(frozen=True)
class BaselineConfig:
    epochs: int = 50
    learning_rate: float = 1e-3
    batch_size: int = 16
    seed: int = 0


class EncoderDecoder:
    """Per-feature encoders whose outputs are concatenated and fed to a trunk.

    A feature without an encoder is passed to the trunk unchanged. The trunk
    ends in a sigmoid (one output, P(pos)) or a softmax over (neg, pos).
    """

    def __init__(self, keys, encoders: dict, trunk: NeuralNet, kind: str):
        self.keys = tuple(keys)
        self.encoders = dict(encoders)
        self.trunk = trunk
        self.kind = kind

    def _forward(self, data: Dataset):
        parts, evals = [], {}
        for k in self.keys:
            x = data.feature(k)
            if k in self.encoders:
                evals[k] = Evaluation(self.encoders[k], x)
                parts.append(evals[k].out)
            else:
                parts.append(x)
        h = np.concatenate(parts, axis=1)
        if h.shape[1] != self.trunk.n_in:
            raise ShapeError(f"{self.kind}: trunk expects {self.trunk.n_in} inputs, got {h.shape[1]}")
        return Evaluation(self.trunk, h), evals

    def predict_proba(self, data: Dataset) -> np.ndarray:
        top, _ = self._forward(data)
        return top.out[:, 0] if self.trunk.head == "sigmoid" else top.out[:, 1]

    def predict(self, data: Dataset) -> np.ndarray:
        return self.predict_proba(data) >= 0.5

    def loss_and_grads(self, data: Dataset):
        """Mean cross-entropy and gradients for the trunk and every encoder."""
        top, evals = self._forward(data)
        y = data.labels
        n = len(y)
        if self.trunk.head == "sigmoid":
            p = np.clip(top.out[:, 0], PROB_EPS, 1 - PROB_EPS)
            loss = -np.mean(np.where(y, np.log(p), np.log(1 - p)))
            U = (np.where(y, -1.0 / p, 1.0 / (1 - p)) / n)[:, None]
        else:
            p_true = np.clip(top.out[np.arange(n), y.astype(int)], PROB_EPS, 1.0)
            loss = -np.mean(np.log(p_true))
            U = np.zeros_like(top.out)
            U[np.arange(n), y.astype(int)] = -1.0 / (n * p_true)
        g_trunk, dh = top.backward_with_input(U)
        grads = {}
        off = 0
        for k in self.keys:
            width = evals[k].out.shape[1] if k in evals else data.feature(k).shape[1]
            if k in evals:
                grads[k] = evals[k].backward(dh[:, off:off + width])
            off += width
        return float(loss), g_trunk, grads

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "keys": list(self.keys),
            "encoders": {k: v.to_dict() for k, v in sorted(self.encoders.items())},
            "trunk": self.trunk.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderDecoder":
        encs = {k: NeuralNet.from_dict(v) for k, v in d["encoders"].items()}
        return cls(d["keys"], encs, NeuralNet.from_dict(d["trunk"]), d["kind"])


def tabular_mlp(n_features: int, mode: str, seed: int = 0, keys=None) -> EncoderDecoder:
    """Trunk over two inputs per feature.

    Symbolic mode reads one ``(n, n_features)`` 0/1 block and encodes each
    bit as ``(bit, 1 - bit)``. Subsymbolic mode puts a 2-logit image encoder
    in front of every feature.
    """
    trunk = init_net((2 * n_features,) + TRUNK_HIDDEN + (1,), "sigmoid", derive_seed(seed, "trunk"))
    if mode == "symbolic":
        return EncoderDecoder((SYMBOLIC_KEY,), {}, trunk, "tabular_mlp_symbolic")
    if mode != "subsymbolic":
        raise ValueError(f"mode must be symbolic or subsymbolic, got {mode!r}")
    keys = tuple(keys or (f"x{j}" for j in range(n_features)))
    if len(keys) != n_features:
        raise ShapeError("one feature key per encoder is required")
    encs = {k: init_net((GLYPH_DIM,) + TABULAR_ENCODER + (2,), "linear", derive_seed(seed, "enc", k))
            for k in keys}
    return EncoderDecoder(keys, encs, trunk, "tabular_mlp_subsymbolic")


def card_encoder_decoder(seed: int = 0) -> EncoderDecoder:
    """Four image encoders (two ranks, two suits) and a two-class decoder."""
    encs = {}
    for k in FEATURE_KEYS:
        dim = RANK_DIM if k.startswith("rank") else SUIT_DIM
        encs[k] = init_net((dim,) + CARD_ENCODER, "linear", derive_seed(seed, "enc", k))
    width = CARD_ENCODER[-1] * len(FEATURE_KEYS)
    decoder = init_net((width,) + DECODER_HIDDEN + (2,), "softmax", derive_seed(seed, "decoder"))
    return EncoderDecoder(FEATURE_KEYS, encs, decoder, "card_encoder_decoder")


def symbolic_view(X, labels) -> Dataset:
    """Binary matrix as one ``(bit, 1 - bit)`` pair per column, without any facts."""
    X = np.asarray(X, dtype=np.float64)
    pairs = np.stack([X, 1.0 - X], axis=2).reshape(len(X), -1)
    return Dataset({SYMBOLIC_KEY: pairs}, labels).without_facts()


def fit(model: EncoderDecoder, data: Dataset, config: BaselineConfig = BaselineConfig()):
    """Minibatch Adam on cross-entropy. Returns ``(model, per-epoch mean loss)``.

    Only a fact-free view of ``data`` is used.
    """
    data = data.without_facts()
    n = len(data)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    states = {k: AdamState.for_params(v.params.size, config.learning_rate)
              for k, v in model.encoders.items()}
    trunk_state = AdamState.for_params(model.trunk.params.size, config.learning_rate)
    rng = np.random.default_rng(derive_seed(config.seed, "baseline", model.kind))
    bs = config.batch_size or n
    trace = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = np.sort(order[start:start + bs])
            loss, g_trunk, grads = model.loss_and_grads(data.subset(idx))
            total += loss * len(idx)
            model.trunk, trunk_state = adam_step(model.trunk, trunk_state, g_trunk)
            for k, g in grads.items():
                model.encoders[k], states[k] = adam_step(model.encoders[k], states[k], g)
        trace.append(total / n)
    return model, trace


def train_mlp(data: Dataset, mode: str, config: BaselineConfig = BaselineConfig(), keys=None):
    """Tabular baseline; ``data`` is a :func:`symbolic_view` or glyph dataset."""
    if mode == "symbolic":
        n_features = data.feature(SYMBOLIC_KEY).shape[1] // 2
    else:
        keys = tuple(keys or sorted(data.features))
        n_features = len(keys)
    model = tabular_mlp(n_features, mode, config.seed, keys)
    return fit(model, data, config)


def train_card_nn(data: Dataset, config: BaselineConfig = BaselineConfig()):
    for k in FEATURE_KEYS:
        data.feature(k)
    return fit(card_encoder_decoder(config.seed), data, config)
