"""Playing cards, Eleusis hidden concepts and two-card window datasets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import Dataset
from ..errors import UnknownConceptError
from ..seeding import derive_seed
from .glyphs import render_glyph

SUITS = ("diamond", "clubs", "hearts", "spades")  # encoded 1..4 in this order
N_SUITS = len(SUITS)
SUIT_SYMBOLS = "ABCD"
RED_SUITS = (1, 3)  # diamond, hearts
DEFAULT_RANKS = 8

RANK_FEATURES = ("rank_img_0", "rank_img_1")
SUIT_FEATURES = ("suit_img_0", "suit_img_1")
FEATURE_KEYS = ("rank_img_0", "suit_img_0", "rank_img_1", "suit_img_1")

CONCEPTS = (
    "hidden_order_simple",
    "hidden_modulo_simple",
    "color_parity",
    "alternating_faces",
    "alternating_parity",
    "increase_suits",
    "suit_order",
    "rank_order",
)

DESK_SIZES = (400, 100, 400)
FULL_SIZES = (1000, 200, 1000)


@dataclass(frozen=True)
class Card:
    suit: int
    rank: int

    def __post_init__(self):
        if not 1 <= self.suit <= N_SUITS:
            raise ValueError(f"suit {self.suit} outside 1..{N_SUITS}")
        if self.rank < 1:
            raise ValueError(f"rank {self.rank} < 1")


def parity(card: Card) -> int:
    return card.rank % 2


def face(card: Card, ranks: int = DEFAULT_RANKS) -> int:
    """Upper half of the ranks are face cards (four of eight, as in a Piquet pack)."""
    return int(card.rank > ranks / 2)


def color(card: Card) -> str:
    return "red" if card.suit in RED_SUITS else "black"


def label_concept(concept: str, c0: Card, c1: Card, ranks: int = DEFAULT_RANKS,
                  hidden_order: str = "disjunction") -> bool:
    """Does the window ``(c0, c1)`` satisfy ``concept``?

    Modular formulas are evaluated literally on 1-based codes, e.g.
    ``(rank0 + 1) mod ranks == rank1``. ``hidden_order`` selects whether
    hidden_order_simple joins its two orders with ``or`` or ``and``.
    """
    if concept == "suit_order":
        return c0.suit < c1.suit
    if concept == "rank_order":
        return c0.rank < c1.rank
    if concept == "hidden_order_simple":
        if hidden_order == "conjunction":
            return c0.rank < c1.rank and c0.suit < c1.suit
        return c0.rank < c1.rank or c0.suit < c1.suit
    if concept == "hidden_modulo_simple":
        return (c0.rank + 1) % ranks == c1.rank or (c0.suit + 1) % N_SUITS == c1.suit
    if concept == "increase_suits":
        return (c0.suit + 1) % N_SUITS == c1.suit
    if concept == "alternating_faces":
        return face(c0, ranks) != face(c1, ranks)
    if concept == "alternating_parity":
        return parity(c0) != parity(c1)
    if concept == "color_parity":
        return (parity(c0) == 1 and color(c1) == "black") or (parity(c0) == 0 and color(c1) == "red")
    raise UnknownConceptError(f"unknown concept {concept!r}")


def gen_cards(n: int, ranks: int = DEFAULT_RANKS, seed: int = 0) -> list[Card]:
    """``n`` cards whose suit and rank counts are as even as possible."""
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    suits = rng.permutation(np.resize(np.arange(1, N_SUITS + 1), n))
    rank_vals = rng.permutation(np.resize(np.arange(1, ranks + 1), n))
    return [Card(int(s), int(r)) for s, r in zip(suits, rank_vals)]


def rank_symbol(rank: int) -> str:
    return str(rank % 10)


def suit_symbol(suit: int) -> str:
    return SUIT_SYMBOLS[suit - 1]


def card_images(card: Card, rank_seed: int, suit_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Rank glyph (64 values) and suit glyph plus colour channel (65 values)."""
    rank_img = render_glyph(rank_symbol(card.rank), rank_seed)
    suit_img = render_glyph(suit_symbol(card.suit), suit_seed)
    return rank_img, np.append(suit_img, 1.0 if color(card) == "red" else 0.0)


def card_facts(card: Card, position: int) -> set[str]:
    return {f"rank{position}_{card.rank}", f"suit{position}_{card.suit}"}


class CardSet:
    """Cards with their rendered images.

    ``split_bit`` makes image seeds of the training (0) and test (1) card sets
    disjoint by construction.
    """

    def __init__(self, cards, seed: int, split_bit: int):
        self.cards = list(cards)
        base = derive_seed(seed, "images") >> 24
        ranks, suits = [], []
        for k, card in enumerate(self.cards):
            r_seed = ((base + 2 * k) << 1) | split_bit
            s_seed = ((base + 2 * k + 1) << 1) | split_bit
            r, s = card_images(card, r_seed, s_seed)
            ranks.append(r)
            suits.append(s)
        self.rank_imgs = np.array(ranks)
        self.suit_imgs = np.array(suits)
        self.image_seeds = {
            ((base + j) << 1) | split_bit for j in range(2 * len(self.cards))
        }

    def __len__(self):
        return len(self.cards)

    def subset(self, idx) -> "CardSet":
        out = object.__new__(CardSet)
        out.cards = [self.cards[i] for i in idx]
        out.rank_imgs = self.rank_imgs[idx]
        out.suit_imgs = self.suit_imgs[idx]
        out.image_seeds = self.image_seeds
        return out

    def windows(self, n: int, concept: str, seed: int, ranks: int = DEFAULT_RANKS,
                hidden_order: str = "disjunction") -> Dataset:
        """``n`` random two-card windows (distinct cards) labelled by ``concept``."""
        rng = np.random.default_rng(seed)
        i0 = rng.integers(0, len(self), size=n)
        offset = rng.integers(1, len(self), size=n)
        i1 = (i0 + offset) % len(self)
        labels, facts = [], []
        for a, b in zip(i0, i1):
            c0, c1 = self.cards[a], self.cards[b]
            labels.append(label_concept(concept, c0, c1, ranks, hidden_order))
            facts.append(card_facts(c0, 0) | card_facts(c1, 1))
        feats = {
            "rank_img_0": self.rank_imgs[i0],
            "suit_img_0": self.suit_imgs[i0],
            "rank_img_1": self.rank_imgs[i1],
            "suit_img_1": self.suit_imgs[i1],
        }
        return Dataset(feats, labels, facts)


def make_card_sets(seed: int, sizes=DESK_SIZES, ranks: int = DEFAULT_RANKS, n_cards: int | None = None):
    """Training, validation and test card sets.

    The training set is generated once; 10% of it becomes the validation set.
    The test set is generated independently with disjoint image seeds.
    """
    n_train, n_val, n_test = sizes
    if n_cards is None:
        n_cards = max(2 * (n_train + n_val), 2 * n_test, 2 * ranks * N_SUITS)
    train_cards = CardSet(gen_cards(n_cards, ranks, derive_seed(seed, "train-cards")), seed, 0)
    test_cards = CardSet(gen_cards(n_cards, ranks, derive_seed(seed, "test-cards")), seed, 1)
    perm = np.random.default_rng(derive_seed(seed, "val-split")).permutation(n_cards)
    n_val_cards = max(2, n_cards // 10)
    return train_cards.subset(perm[n_val_cards:]), train_cards.subset(perm[:n_val_cards]), test_cards


def make_eleusis_dataset(concept: str, seed: int, sizes=DESK_SIZES, ranks: int = DEFAULT_RANKS,
                         hidden_order: str = "disjunction", n_cards: int | None = None):
    """``(train, val, test)`` datasets of labelled two-card windows."""
    if concept not in CONCEPTS:
        raise UnknownConceptError(f"unknown concept {concept!r}")
    train_cards, val_cards, test_cards = make_card_sets(seed, sizes, ranks, n_cards)
    n_train, n_val, n_test = sizes
    kw = dict(concept=concept, ranks=ranks, hidden_order=hidden_order)
    return (
        train_cards.windows(n_train, seed=derive_seed(seed, concept, "train"), **kw),
        val_cards.windows(n_val, seed=derive_seed(seed, concept, "val"), **kw),
        test_cards.windows(n_test, seed=derive_seed(seed, concept, "test"), **kw),
    )
