"""Topic models fit by collapsed Gibbs sampling, and topic-count selection.

Model selection minimizes the mean pairwise cosine similarity between
topic-term rows over a candidate range of topic counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DataError, InternalError, UsageError
from .seqmine import DocTermMatrix, parse_term, term_repr


@dataclass
class TopicModel:
    k: int
    alpha: float
    beta: float
    seed: int
    iterations: int
    vocab: list
    doc_ids: list[str]
    phi: np.ndarray    # k x V topic-term probabilities, rows sum to 1
    theta: np.ndarray  # n x k document-topic probabilities, rows sum to 1
    empty_docs: list[str] = field(default_factory=list)


@dataclass
class TopicSweepResult:
    candidates: list[tuple[int, float]]
    chosen_k: int


@njit(cache=True)
def _gibbs_sweep(doc_of, term_of, z, n_dt, n_tv, n_t, alpha, beta, uniforms):
    k, vocab_size = n_tv.shape
    cumulative = np.empty(k)
    for i in range(doc_of.size):
        d = doc_of[i]
        v = term_of[i]
        t = z[i]
        n_dt[d, t] -= 1
        n_tv[t, v] -= 1
        n_t[t] -= 1
        total = 0.0
        for c in range(k):
            weight = (n_tv[c, v] + beta) / (n_t[c] + vocab_size * beta) * (
                n_dt[d, c] + alpha
            )
            total += weight
            cumulative[c] = total
        draw = uniforms[i] * total
        t_new = k - 1
        for c in range(k):
            if draw < cumulative[c]:
                t_new = c
                break
        z[i] = t_new
        n_dt[d, t_new] += 1
        n_tv[t_new, v] += 1
        n_t[t_new] += 1


def fit_lda(
    matrix: DocTermMatrix,
    k: int,
    alpha: float | None = None,
    beta: float = 0.01,
    iterations: int = 500,
    seed: int = 0,
) -> TopicModel:
    """Collapsed Gibbs sampling with symmetric Dirichlet priors.

    alpha defaults to 50/k. The estimate is taken from the final sample;
    identical inputs and seed give identical output.
    """
    if k < 1:
        raise UsageError("k must be >= 1")
    if iterations < 1:
        raise UsageError("iterations must be >= 1")
    if matrix.counts.nnz == 0:
        raise DataError("empty corpus")
    if alpha is None:
        alpha = 50.0 / k

    n_docs, vocab_size = matrix.shape
    coo = matrix.counts.tocoo()
    order = np.lexsort((coo.col, coo.row))
    data = coo.data[order].astype(np.int64)
    doc_of = np.repeat(coo.row[order].astype(np.int64), data)
    term_of = np.repeat(coo.col[order].astype(np.int64), data)
    n_tokens = doc_of.size

    rng = np.random.default_rng(np.uint64(seed & (2**64 - 1)))
    z = rng.integers(0, k, size=n_tokens, dtype=np.int64)
    n_dt = np.zeros((n_docs, k), dtype=np.int64)
    n_tv = np.zeros((k, vocab_size), dtype=np.int64)
    np.add.at(n_dt, (doc_of, z), 1)
    np.add.at(n_tv, (z, term_of), 1)
    n_t = n_tv.sum(axis=1)

    for _ in range(iterations):
        uniforms = rng.random(n_tokens)
        _gibbs_sweep(doc_of, term_of, z, n_dt, n_tv, n_t, alpha, beta, uniforms)

    if n_dt.sum() != n_tokens or n_tv.sum() != n_tokens:
        raise InternalError("token counts not conserved during sampling")

    phi = (n_tv + beta) / (n_t + vocab_size * beta)[:, None]
    doc_totals = n_dt.sum(axis=1)
    theta = (n_dt + alpha) / (doc_totals + k * alpha)[:, None]
    empty = doc_totals == 0
    theta[empty] = 1.0 / k
    empty_docs = [matrix.doc_ids[i] for i in np.flatnonzero(empty)]

    return TopicModel(
        k=k,
        alpha=alpha,
        beta=beta,
        seed=seed,
        iterations=iterations,
        vocab=list(matrix.terms),
        doc_ids=list(matrix.doc_ids),
        phi=phi,
        theta=theta,
        empty_docs=empty_docs,
    )


def topic_similarity(model: TopicModel) -> float:
    """Mean cosine similarity over all unordered pairs of topic-term rows."""
    if model.k < 2:
        raise UsageError("topic similarity needs k >= 2")
    norms = np.linalg.norm(model.phi, axis=1)
    normalized = model.phi / norms[:, None]
    gram = normalized @ normalized.T
    upper = gram[np.triu_indices(model.k, 1)]
    return float(upper.mean())


def sweep_seed(seed: int, k: int) -> int:
    """Per-candidate seed so each fit in a sweep is independently reproducible."""
    return seed ^ k


def select_topic_count(
    matrix: DocTermMatrix,
    k_min: int,
    k_max: int,
    alpha: float | None = None,
    beta: float = 0.01,
    iterations: int = 500,
    seed: int = 0,
) -> TopicSweepResult:
    """Fit one model per k in [k_min, k_max] and choose the similarity argmin.

    Ties go to the smallest k.
    """
    if not (1 <= k_min <= k_max):
        raise UsageError("need 1 <= k_min <= k_max")
    if k_min < 2:
        raise UsageError("k_min must be >= 2 for similarity to be defined")
    candidates = []
    for k in range(k_min, k_max + 1):
        model = fit_lda(matrix, k, alpha, beta, iterations, sweep_seed(seed, k))
        candidates.append((k, topic_similarity(model)))
    chosen_k = min(candidates, key=lambda kv: (kv[1], kv[0]))[0]
    return TopicSweepResult(candidates=candidates, chosen_k=chosen_k)


def best_fit(
    matrix: DocTermMatrix,
    k: int,
    alpha: float | None = None,
    beta: float = 0.01,
    iterations: int = 500,
    seeds: list[int] | None = None,
) -> TopicModel:
    """Fit once per seed and keep the model with the least similar topics.

    Gibbs sampling can settle into a local mode where topics blur together;
    restarting and keeping the lowest mean pairwise similarity picks the
    cleanest decomposition. Ties go to the earlier seed.
    """
    if not seeds:
        raise UsageError("best_fit needs at least one seed")
    best_model = None
    best_sim = None
    for seed in seeds:
        model = fit_lda(matrix, k, alpha, beta, iterations, seed)
        sim = topic_similarity(model) if k >= 2 else 0.0
        if best_sim is None or sim < best_sim:
            best_model, best_sim = model, sim
    return best_model


def explanation_vector(model: TopicModel, topic_index: int) -> np.ndarray:
    """Per-patient probabilities that one topic explains each patient."""
    if not 0 <= topic_index < model.k:
        raise UsageError(f"topic index {topic_index} out of range for k={model.k}")
    return model.theta[:, topic_index].copy()


def top_terms(
    model: TopicModel, topic_index: int, n: int = 10, cutoff: float = 0.01
) -> list[tuple]:
    """Up to n highest-probability terms with probability >= cutoff."""
    if not 0 <= topic_index < model.k:
        raise UsageError(f"topic index {topic_index} out of range for k={model.k}")
    row = model.phi[topic_index]
    ranked = sorted(
        ((float(p), term) for term, p in zip(model.vocab, row)),
        key=lambda pt: (-pt[0], term_repr(pt[1])),
    )
    return [(term, p) for p, term in ranked if p >= cutoff - 1e-12][:n]


def _round12(x: float) -> float:
    return float(f"{x:.12g}")


def save_model(model: TopicModel, path) -> None:
    doc = {
        "k": model.k,
        "alpha": model.alpha,
        "beta": model.beta,
        "seed": model.seed,
        "iterations": model.iterations,
        "vocab": [term_repr(t) for t in model.vocab],
        "doc_ids": model.doc_ids,
        "phi": [[_round12(v) for v in row] for row in model.phi.tolist()],
        "theta": [[_round12(v) for v in row] for row in model.theta.tolist()],
        "empty_docs": model.empty_docs,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> TopicModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return TopicModel(
        k=doc["k"],
        alpha=doc["alpha"],
        beta=doc["beta"],
        seed=doc["seed"],
        iterations=doc["iterations"],
        vocab=[parse_term(t) for t in doc["vocab"]],
        doc_ids=doc["doc_ids"],
        phi=np.asarray(doc["phi"], dtype=float),
        theta=np.asarray(doc["theta"], dtype=float),
        empty_docs=doc.get("empty_docs", []),
    )
