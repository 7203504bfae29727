"""Deterministic random streams addressed by (root seed, path).

Streams are split by hashing each path label into seed-sequence entropy, so
distinct paths give statistically independent generators and the same
(root_seed, path) always reproduces the same draw sequence.  Experiments
derive one stream per (iteration, episode, purpose) and never share
generators across purposes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np

Label = int | str


def _label_words(label) -> list[int]:
    """Hash a path label (or the root seed) into four 32-bit entropy words."""
    data = f"{type(label).__name__}:{label!r}".encode()
    digest = hashlib.sha256(data).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


@dataclass(frozen=True)
class RngStream:
    """A reproducible generator identified by its root seed and label path."""

    root_seed: int
    path: tuple[Label, ...]

    def __post_init__(self):
        if not self.path:
            raise ValueError("stream path must contain at least one label")
        for label in self.path:
            if not isinstance(label, (int, str)):
                raise TypeError(f"path labels must be int or str, got {type(label).__name__}")

    @cached_property
    def generator(self) -> np.random.Generator:
        words = _label_words(self.root_seed)
        for label in self.path:
            words.extend(_label_words(label))
        return np.random.default_rng(np.random.SeedSequence(words))

    def substream(self, *labels: Label) -> "RngStream":
        return derive_stream(self.root_seed, self.path + tuple(labels))


def derive_stream(root_seed: int, path) -> RngStream:
    """Build the stream for ``path`` under ``root_seed``.

    Identical arguments always yield identical draw sequences; any change to
    the seed or to any label yields an unrelated stream.
    """
    return RngStream(int(root_seed), tuple(path))
