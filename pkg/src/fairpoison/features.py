"""Hashed TF-IDF featurization and external embedding ingestion.

Texts become fixed-dimension sparse vectors: each token is hashed into
one of ``num_buckets`` buckets (stable 64-bit hash of the lowercased
token), weighted by smoothed inverse document frequency, and the result
is L2-normalized. Hashing guarantees that trigger tokens unseen at fit
time still land on a feature, which a learned vocabulary would drop.

Precomputed dense embeddings can be loaded from JSONL as an alternative
input to the classifiers; those are taken as-is and never renormalized.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import Corpus, Example, token_strings

__all__ = [
    "FeaturizerModel",
    "FeatureVector",
    "DEFAULT_NUM_BUCKETS",
    "hash_token",
    "fit_featurizer",
    "transform",
    "transform_corpus",
    "stack_features",
    "load_embeddings",
    "save_featurizer",
    "load_featurizer",
    "HashedTfidfVectorizer",
]

DEFAULT_NUM_BUCKETS = 2**18
MIN_NUM_BUCKETS = 2**10


def hash_token(token: str, num_buckets: int) -> int:
    """Stable bucket index for a token (already lowercased by callers)."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % num_buckets


def _check_num_buckets(num_buckets: int) -> None:
    if num_buckets < MIN_NUM_BUCKETS or num_buckets & (num_buckets - 1):
        raise ValueError(
            f"num_buckets must be a power of two >= {MIN_NUM_BUCKETS}, got {num_buckets}"
        )


@dataclass(frozen=True)
class FeaturizerModel:
    """Fitted featurizer state: bucket count plus the sparse idf map.

    ``idf`` holds weights only for buckets observed in the fitting
    corpus; unseen buckets fall back to the df=0 weight ln(1+N)+1, which
    needs ``num_docs``.
    """

    num_buckets: int
    idf: dict[int, float]
    num_docs: int
    fitted_on: str = ""
    lowercase: bool = True

    def __post_init__(self) -> None:
        _check_num_buckets(self.num_buckets)
        if self.num_docs < 1:
            raise ValueError(f"num_docs must be positive, got {self.num_docs}")
        if any(w < 0 for w in self.idf.values()):
            raise ValueError("idf weights must be non-negative")

    def default_idf(self) -> float:
        return math.log((1 + self.num_docs) / 1.0) + 1.0

    def bucket_of(self, token: str) -> int:
        return hash_token(token.lower() if self.lowercase else token, self.num_buckets)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """One featurized text: sorted sparse (indices, values), or dense.

    Sparse vectors coming out of :func:`transform` are unit L2 norm (or
    all-zero for empty text). Dense vectors come from the embedding
    ingestion path and carry whatever norm the file had.
    """

    indices: np.ndarray
    values: np.ndarray
    dim: int
    dense: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        if self.dense is not None:
            return
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values length mismatch")
        if len(self.indices) and (
            np.any(np.diff(self.indices) <= 0)
            or self.indices[0] < 0
            or self.indices[-1] >= self.dim
        ):
            raise ValueError("indices must be strictly increasing within [0, dim)")

    def norm(self) -> float:
        if self.dense is not None:
            return float(np.linalg.norm(self.dense))
        return float(np.linalg.norm(self.values))

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return np.asarray(self.dense, dtype=np.float64)
        out = np.zeros(self.dim, dtype=np.float64)
        out[self.indices] = self.values
        return out


def fit_featurizer(train: Corpus, num_buckets: int = DEFAULT_NUM_BUCKETS) -> FeaturizerModel:
    """Fit idf weights on the training corpus only.

    idf(b) = ln((1+N)/(1+df_b)) + 1 with N the corpus size and df_b the
    number of documents containing any token hashing to bucket b.
    """
    _check_num_buckets(num_buckets)
    if len(train) == 0:
        raise ValueError("empty corpus")
    n_docs = len(train)
    df: Counter[int] = Counter()
    for ex in train:
        buckets = {hash_token(tok.lower(), num_buckets) for tok in token_strings(ex.text)}
        df.update(buckets)
    idf = {b: math.log((1 + n_docs) / (1 + count)) + 1.0 for b, count in sorted(df.items())}
    return FeaturizerModel(num_buckets=num_buckets, idf=idf, num_docs=n_docs, fitted_on=train.name)


def transform(featurizer: FeaturizerModel, text: str) -> FeatureVector:
    """Featurize one text: bucketed tf-idf, L2-normalized."""
    counts: Counter[int] = Counter()
    for tok in token_strings(text):
        counts[featurizer.bucket_of(tok)] += 1
    if not counts:
        return FeatureVector(
            indices=np.empty(0, dtype=np.int64),
            values=np.empty(0, dtype=np.float64),
            dim=featurizer.num_buckets,
        )
    default = featurizer.default_idf()
    buckets = sorted(counts)
    values = np.array([counts[b] * featurizer.idf.get(b, default) for b in buckets], dtype=np.float64)
    values /= np.linalg.norm(values)
    return FeatureVector(
        indices=np.array(buckets, dtype=np.int64), values=values, dim=featurizer.num_buckets
    )


def transform_corpus(featurizer: FeaturizerModel, source: Corpus | Iterable[str]) -> list[FeatureVector]:
    texts = [ex.text for ex in source] if isinstance(source, Corpus) else list(source)
    return [transform(featurizer, text) for text in texts]


def stack_features(vectors: Sequence[FeatureVector]) -> sp.csr_matrix | np.ndarray:
    """Stack feature vectors into a (n, dim) matrix for the trainers.

    All-sparse input gives a CSR matrix; all-dense input gives an
    ndarray. Mixing the two is an error, as is a dimension mismatch.
    """
    if not vectors:
        raise ValueError("no feature vectors to stack")
    dims = {v.dim for v in vectors}
    if len(dims) != 1:
        raise ValueError(f"inconsistent feature dimensions: {sorted(dims)}")
    dense_flags = {v.dense is not None for v in vectors}
    if len(dense_flags) != 1:
        raise ValueError("cannot stack a mix of sparse and dense feature vectors")
    dim = dims.pop()
    if dense_flags.pop():
        return np.vstack([np.asarray(v.dense, dtype=np.float64) for v in vectors])
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + len(v.indices)
    indices = np.concatenate([v.indices for v in vectors]) if indptr[-1] else np.empty(0, dtype=np.int64)
    data = np.concatenate([v.values for v in vectors]) if indptr[-1] else np.empty(0, dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


def load_embeddings(path: str | Path, corpus: Corpus) -> dict[str, FeatureVector]:
    """Load precomputed dense embeddings covering every corpus id.

    The file is JSONL of ``{"id": ..., "vector": [...]}``. Dimensions
    must agree across rows; vectors are not renormalized.
    """
    path = Path(path)
    raw: dict[str, np.ndarray] = {}
    dim: int | None = None
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                ex_id, vector = obj["id"], obj["vector"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}: line {line_no}: bad embedding row: {exc}") from exc
            arr = np.asarray(vector, dtype=np.float64)
            if arr.ndim != 1 or arr.size == 0:
                raise ValueError(f"{path}: line {line_no}: vector must be a non-empty flat list")
            if dim is None:
                dim = arr.size
            elif arr.size != dim:
                raise ValueError(
                    f"{path}: line {line_no}: dimension {arr.size} does not match earlier rows ({dim})"
                )
            raw[str(ex_id)] = arr
    missing = [ex.id for ex in corpus if ex.id not in raw]
    if missing:
        raise ValueError(f"{path}: missing embedding for id {missing[0]!r} ({len(missing)} missing in total)")
    empty_i = np.empty(0, dtype=np.int64)
    empty_v = np.empty(0, dtype=np.float64)
    return {
        ex.id: FeatureVector(indices=empty_i, values=empty_v, dim=int(dim or 0), dense=raw[ex.id])
        for ex in corpus
    }


def save_featurizer(featurizer: FeaturizerModel, path: str | Path) -> None:
    payload = {
        "num_buckets": featurizer.num_buckets,
        "num_docs": featurizer.num_docs,
        "fitted_on": featurizer.fitted_on,
        "lowercase": featurizer.lowercase,
        "idf": {str(b): w for b, w in sorted(featurizer.idf.items())},
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_featurizer(path: str | Path) -> FeaturizerModel:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        return FeaturizerModel(
            num_buckets=payload["num_buckets"],
            idf={int(b): float(w) for b, w in payload["idf"].items()},
            num_docs=payload["num_docs"],
            fitted_on=payload.get("fitted_on", ""),
            lowercase=payload.get("lowercase", True),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: not a saved featurizer: {exc}") from exc


class HashedTfidfVectorizer(TransformerMixin, BaseEstimator):
    """Estimator-style wrapper around the featurizer functions.

    fit(X) accepts a Corpus or an iterable of strings; transform(X)
    returns a CSR matrix of unit-norm rows. The fitted state lives in
    ``model_``.
    """

    def __init__(self, num_buckets: int = DEFAULT_NUM_BUCKETS):
        self.num_buckets = num_buckets

    def fit(self, X, y=None):
        if isinstance(X, Corpus):
            corpus = X
        else:
            # Labels/groups are irrelevant to idf fitting.
            corpus = Corpus(
                examples=tuple(
                    Example(id=f"{i:06d}", text=t, label=0, group=0) for i, t in enumerate(X)
                )
            )
        self.model_ = fit_featurizer(corpus, num_buckets=self.num_buckets)
        return self

    def transform(self, X) -> sp.csr_matrix:
        if not hasattr(self, "model_"):
            raise ValueError("HashedTfidfVectorizer is not fitted; call fit first")
        matrix = stack_features(transform_corpus(self.model_, X))
        assert sp.issparse(matrix)
        return matrix
