"""Deterministic text embeddings: hashed bags of character n-grams.

Stands in for a learned encoder behind the same cosine interface. The
hashing is seeded and PYTHONHASHSEED-independent, so embeddings are stable
across processes and runs.
"""

import zlib
from functools import lru_cache

import numpy as np

EMBED_DIM = 256
_NGRAM_RANGE = (2, 4)
_HASH_SEED = b"daychain-textvec-v1"


def embed_text(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    """Embed text as a signed hashed n-gram count vector (not normalized)."""
    vec = np.zeros(dim, dtype=np.float64)
    padded = f" {text.strip().lower()} "
    for n in range(_NGRAM_RANGE[0], _NGRAM_RANGE[1] + 1):
        if len(padded) < n:
            continue
        for i in range(len(padded) - n + 1):
            gram = padded[i : i + n].encode("utf-8")
            h = zlib.crc32(_HASH_SEED + gram)
            sign = 1.0 if (h >> 31) & 1 == 0 else -1.0
            vec[h % dim] += sign
    return vec


@lru_cache(maxsize=4096)
def embed_text_cached(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    """Cached read-only variant for hot scoring loops."""
    vec = embed_text(text, dim)
    vec.setflags(write=False)
    return vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1]; zero vectors score 0."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(float(np.dot(a, b)) / (na * nb), -1.0, 1.0))


def text_similarity(a: str, b: str) -> float:
    """Cosine similarity between two texts' embeddings."""
    return cosine(embed_text(a), embed_text(b))
