"""Bag-of-words loading and the sparse-PCA text pipeline.

The loader consumes the UCI bag-of-words layout (three header lines D, W,
NNZ; then 1-indexed ``docID wordID count`` triples).  The pipeline applies a
log(1 + count) stabilising transform, centers implicitly inside the
covariance product (the term matrix is never densified), and extracts k
sparse components by deflation around a restart-limited RTPM oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import FormatError, ParameterError
from .models import CenteredCov
from .solvers import RtpmConfig, kspca_deflate, rtpm_with_report


@dataclass
class TextCorpus:
    """Sparse doc-by-word counts over a selected, rank-ordered vocabulary."""

    counts: sp.csr_matrix
    vocabulary: list

    def __post_init__(self):
        if not sp.issparse(self.counts):
            self.counts = sp.csr_matrix(np.asarray(self.counts))
        self.counts = self.counts.tocsr()
        if len(self.vocabulary) != self.counts.shape[1]:
            raise ParameterError("vocabulary length must equal the word dimension")
        if self.counts.nnz and self.counts.data.min() < 0:
            raise ParameterError("counts must be nonnegative")

    @property
    def n_docs(self):
        return self.counts.shape[0]

    @property
    def vocab_size(self):
        return self.counts.shape[1]


def _parse_header_line(fh, name, lineno):
    line = fh.readline()
    if not line:
        raise FormatError(f"missing {name} header line", line=lineno)
    try:
        return int(line.strip()), lineno + 1
    except ValueError:
        raise FormatError(f"{name} header is not an integer: {line.strip()!r}", line=lineno)


def load_bagofwords(docword_path, vocab_path, n_docs, vocab_size):
    """Load a UCI bag-of-words pair, keep the first ``n_docs`` documents, and
    select the ``vocab_size`` highest-total-count words (ties to the smaller
    wordID), reindexed densely in ranking order."""
    with open(vocab_path, "r", encoding="utf-8") as fh:
        all_words = [line.rstrip("\n") for line in fh]
    with open(docword_path, "r", encoding="utf-8") as fh:
        lineno = 1
        D, lineno = _parse_header_line(fh, "D", lineno)
        W, lineno = _parse_header_line(fh, "W", lineno)
        NNZ, lineno = _parse_header_line(fh, "NNZ", lineno)
        if len(all_words) != W:
            raise FormatError(f"vocab file has {len(all_words)} words, header says W={W}")
        if not 1 <= n_docs <= D:
            raise ParameterError(f"n_docs={n_docs} outside [1, D={D}]")
        if not 1 <= vocab_size <= W:
            raise ParameterError(f"vocab_size={vocab_size} outside [1, W={W}]")
        docs, words, counts = [], [], []
        body = 0
        for line in fh:
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise FormatError(f"expected 'docID wordID count', got {line.strip()!r}",
                                  line=lineno)
            try:
                doc, word, count = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError:
                raise FormatError(f"non-integer field in {line.strip()!r}", line=lineno)
            if not 1 <= doc <= D or not 1 <= word <= W or count < 0:
                raise FormatError(f"entry out of range: {line.strip()!r}", line=lineno)
            body += 1
            lineno += 1
            if doc <= n_docs:
                docs.append(doc - 1)
                words.append(word - 1)
                counts.append(count)
        if body != NNZ:
            raise FormatError(f"header NNZ={NNZ} but body has {body} entries")
    full = sp.csr_matrix(
        (np.asarray(counts, dtype=np.float64), (docs, words)), shape=(n_docs, W)
    )
    totals = np.asarray(full.sum(axis=0)).ravel()
    ranking = np.argsort(-totals, kind="stable")[:vocab_size]
    selected = full[:, ranking].tocsr()
    vocabulary = [all_words[j] for j in ranking]
    return TextCorpus(counts=selected, vocabulary=vocabulary)


@dataclass
class TextPipelineResult:
    components: np.ndarray  # d x k, each column unit norm with <= r nonzeros
    top_words: list  # k lists of the top-10 words by |entry|
    restarts: np.ndarray  # restart coordinates made available to the solver


def variance_ranked_restarts(features, mu, budget):
    """Coordinates of the ``budget`` largest feature variances (ties to the
    smaller index)."""
    second = np.asarray(features.multiply(features).mean(axis=0)).ravel()
    var = second - mu * mu
    budget = min(int(budget), var.shape[0])
    if budget < 1:
        raise ParameterError("restart budget must be >= 1")
    return np.sort(np.argsort(-var, kind="stable")[:budget])


def text_pipeline(corpus, k=4, r=50, T=50, restart_budget=200, top=10):
    """log(1+count) features, implicit centering, deflated RTPM components.

    Restarts are limited to the ``restart_budget`` highest-variance
    coordinates; each extracted component has at most ``r`` nonzeros.
    """
    if min(k, r, T) < 1:
        raise ParameterError("k, r, T must be positive")
    features = corpus.counts.copy().astype(np.float64)
    features.data = np.log1p(features.data)
    mu = np.asarray(features.mean(axis=0)).ravel()
    op = CenteredCov(features, mu)
    restarts = variance_ranked_restarts(features, mu, restart_budget)
    cfg = RtpmConfig(r=min(r, op.dim), T=T, mode="full", restarts=restarts,
                     matvec="matfree")

    def oracle(deflated):
        return rtpm_with_report(deflated, cfg).candidate

    components = kspca_deflate(op, k, oracle)
    top_words = []
    for j in range(k):
        order = np.argsort(-np.abs(components[:, j]), kind="stable")[:top]
        top_words.append([corpus.vocabulary[int(i)] for i in order])
    return TextPipelineResult(components=components, top_words=top_words,
                              restarts=restarts)
