"""Reduced words of the Schottky group generated by the circle-pairing maps.

Letters are signed generator indices: ``+j`` stands for ``theta_j`` and
``-j`` for its inverse.  A word ``(l1, l2, ..., ln)`` denotes the composition
``theta_l1 o theta_l2 o ... o theta_ln``.

The prime-function product runs over a half set: every non-identity reduced
word up to the truncation level, keeping exactly one of each ``{w, w^-1}``
pair.  The kept representative is the lexicographically smaller of the two
under the letter order ``+1 < -1 < +2 < -2 < ...``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .domain import CircularDomain, MobiusMap, generator

DEFAULT_WORD_CAP = 10**6


class WordCapExceeded(RuntimeError):
    """Raised when enumeration would produce more words than the configured cap."""


@dataclass(frozen=True)
class GroupWord:
    letters: tuple[int, ...]
    composed: MobiusMap

    def inverse_letters(self) -> tuple[int, ...]:
        return inverse_word(self.letters)

    def __call__(self, z):
        return self.composed(z)


def inverse_word(letters) -> tuple[int, ...]:
    return tuple(-l for l in reversed(letters))


def is_reduced(letters) -> bool:
    return all(a != -b for a, b in zip(letters, letters[1:]))


def letter_key(letter: int) -> int:
    # +1 -> 1, -1 -> 2, +2 -> 3, -2 -> 4, ...
    return 2 * abs(letter) - (1 if letter > 0 else 0)


def count_reduced_words(M: int, n: int) -> int:
    """Number of reduced words of length exactly ``n`` on ``M`` generators."""
    if n == 0:
        return 1
    if M == 0:
        return 0
    return 2 * M * (2 * M - 1) ** (n - 1)


def half_set_size(M: int, level: int) -> int:
    return sum(count_reduced_words(M, n) for n in range(1, level + 1)) // 2


@dataclass(frozen=True)
class WordSet:
    """Half set of reduced words up to ``level`` with their composed maps.

    The coefficient arrays ``a, b, c, d`` (one entry per word, unit
    determinant) are what the prime-function evaluator consumes.
    """

    level: int
    letters: tuple[tuple[int, ...], ...]
    a: np.ndarray = field(repr=False, compare=False)
    b: np.ndarray = field(repr=False, compare=False)
    c: np.ndarray = field(repr=False, compare=False)
    d: np.ndarray = field(repr=False, compare=False)
    full_set_flag: bool = False

    def __len__(self) -> int:
        return len(self.letters)

    @cached_property
    def half_set(self) -> tuple[GroupWord, ...]:
        return tuple(
            GroupWord(w, MobiusMap(self.a[i], self.b[i], self.c[i], self.d[i]))
            for i, w in enumerate(self.letters)
        )

    def index(self, letters) -> int:
        return self.letters.index(tuple(letters))

    def with_inverse(self, i: int) -> WordSet:
        """Copy with word ``i`` replaced by its inverse (same group element pair)."""
        letters = list(self.letters)
        letters[i] = inverse_word(letters[i])
        a, b, c, d = (arr.copy() for arr in (self.a, self.b, self.c, self.d))
        a[i], b[i], c[i], d[i] = self.d[i], -self.b[i], -self.c[i], self.a[i]
        return WordSet(self.level, tuple(letters), a, b, c, d, self.full_set_flag)


def _generator_matrices(d: CircularDomain) -> dict[int, np.ndarray]:
    mats = {}
    for j in range(1, d.M + 1):
        g = generator(d, j)
        mats[j] = g.matrix
        mats[-j] = g.inverse().matrix
    return mats


def enumerate_words(
    d: CircularDomain,
    level: int,
    cap: int = DEFAULT_WORD_CAP,
    full: bool = False,
) -> WordSet:
    """Breadth-first enumeration of the half set up to word length ``level``.

    Each child's composed map is its parent's map times one generator, so no
    word is recomposed from scratch.  With ``full=True`` both members of every
    inverse pair are kept.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    size = half_set_size(d.M, level) * (2 if full else 1)
    if size > cap:
        raise WordCapExceeded(
            f"level {level} with M={d.M} needs {size} words, above the cap of {cap}"
        )
    empty = np.zeros(0, dtype=complex)
    if d.M == 0 or level == 0:
        return WordSet(level, (), empty, empty, empty, empty, full)

    gens = _generator_matrices(d)
    alphabet = np.array([l for j in range(1, d.M + 1) for l in (j, -j)], dtype=int)
    gen_stack = np.stack([gens[int(l)] for l in alphabet])

    kept_letters: list[tuple[int, ...]] = []
    kept_mats: list[np.ndarray] = []

    words = alphabet[:, None]
    mats = gen_stack.copy()
    for n in range(1, level + 1):
        if n > 1:
            # every (parent, letter) pair whose letter does not cancel the last one
            parent_idx, letter_idx = np.nonzero(words[:, -1][:, None] != -alphabet[None, :])
            words = np.concatenate([words[parent_idx], alphabet[letter_idx][:, None]], axis=1)
            mats = mats[parent_idx] @ gen_stack[letter_idx]
        keys = 2 * np.abs(words) - (words > 0)
        inv_keys = keys[:, ::-1] + np.where(words[:, ::-1] > 0, 1, -1)
        if full:
            keep = np.ones(len(words), dtype=bool)
        else:
            diff = keys - inv_keys
            first = np.argmax(diff != 0, axis=1)
            keep = diff[np.arange(len(words)), first] < 0
        kept_letters.extend(tuple(int(x) for x in row) for row in words[keep])
        kept_mats.append(mats[keep])

    # products of unit-determinant generators; recomputing ad - bc for long
    # words only adds cancellation error, so no renormalisation here
    allm = np.concatenate(kept_mats)
    return WordSet(
        level,
        tuple(kept_letters),
        allm[:, 0, 0].copy(),
        allm[:, 0, 1].copy(),
        allm[:, 1, 0].copy(),
        allm[:, 1, 1].copy(),
        full,
    )


def compose_letters(d: CircularDomain, letters) -> MobiusMap:
    """Composed map of an arbitrary (not necessarily reduced) word."""
    gens = _generator_matrices(d)
    m = np.eye(2, dtype=complex)
    for l in letters:
        m = m @ gens[int(l)]
    return MobiusMap.from_matrix(m)


def compose(w: GroupWord, z):
    """Apply ``w`` to ``z``; poles come back as non-finite values."""
    return w.composed(z)
