"""Seeded synthetic corpus generator with planted bundle structure.

Each bundle owns disjoint workflow-topic action blocks and phenotype-topic
code blocks, so recovered topics and clusters can be scored against the
construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score

from .cluster import ClusterReport
from .errors import DataError, UsageError
from .topics import TopicModel

# Probability of switching to another of the bundle's workflow topics at
# each sequence position; runs within one topic keep its n-grams frequent.
TOPIC_SWITCH_RATE = 0.1


@dataclass
class PlantedSpec:
    n_bundles: int
    workflow_topics_per_bundle: int
    phenotype_topics_per_bundle: int
    patients_per_bundle: int
    action_vocab_size: int
    code_vocab_size: int
    tokens_per_patient_seq: int
    codes_per_patient: int
    noise_rate: float
    seed: int

    def validate(self) -> None:
        for name in (
            "n_bundles",
            "workflow_topics_per_bundle",
            "phenotype_topics_per_bundle",
            "patients_per_bundle",
            "tokens_per_patient_seq",
            "codes_per_patient",
        ):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be >= 1")
        if not 0 <= self.noise_rate < 1:
            raise UsageError("noise_rate must be in [0, 1)")
        if self.action_block_size < 2:
            raise DataError(
                "action vocabulary too small for disjoint workflow-topic blocks"
            )
        if self.code_block_size < 1:
            raise DataError(
                "code vocabulary too small for disjoint phenotype-topic blocks"
            )

    @property
    def n_workflow_topics(self) -> int:
        return self.n_bundles * self.workflow_topics_per_bundle

    @property
    def n_phenotype_topics(self) -> int:
        return self.n_bundles * self.phenotype_topics_per_bundle

    @property
    def action_block_size(self) -> int:
        return self.action_vocab_size // self.n_workflow_topics

    @property
    def code_block_size(self) -> int:
        return self.code_vocab_size // self.n_phenotype_topics


def _action_label_parts(action: int) -> tuple[str, str]:
    return f"role{action:04d}", f"reason{action:04d}"


def _code_name(code: int) -> str:
    return f"C{code:04d}"


@dataclass
class GroundTruth:
    patient_bundle: dict[str, int]
    workflow_topic_terms: list[dict[str, float]]   # composed label -> prob
    phenotype_topic_terms: list[dict[str, float]]  # code name -> prob
    bundle_workflow_topics: list[list[int]]
    bundle_phenotype_topics: list[list[int]]

    def save(self, path) -> None:
        doc = {
            "patient_bundle": self.patient_bundle,
            "workflow_topic_terms": self.workflow_topic_terms,
            "phenotype_topic_terms": self.phenotype_topic_terms,
            "bundle_workflow_topics": self.bundle_workflow_topics,
            "bundle_phenotype_topics": self.bundle_phenotype_topics,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "GroundTruth":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls(**doc)


def generate_corpus(spec: PlantedSpec) -> tuple[str, str, GroundTruth]:
    """Emit events.csv and diagnoses.csv text plus the planted ground truth."""
    spec.validate()
    rng = np.random.default_rng(np.uint64(spec.seed & (2**64 - 1)))
    n_patients = spec.n_bundles * spec.patients_per_bundle
    bundle_of = np.repeat(np.arange(spec.n_bundles), spec.patients_per_bundle)
    patient_ids = [f"h{i:06d}" for i in range(n_patients)]

    wpb, ppb = spec.workflow_topics_per_bundle, spec.phenotype_topics_per_bundle
    a_block, c_block = spec.action_block_size, spec.code_block_size
    seq_len, n_codes = spec.tokens_per_patient_seq, spec.codes_per_patient

    # Workflow topic per token: sticky choice among the bundle's topics.
    switch = rng.random((n_patients, seq_len)) < TOPIC_SWITCH_RATE
    fresh = rng.integers(0, wpb, size=(n_patients, seq_len))
    local_topic = np.empty((n_patients, seq_len), dtype=np.int64)
    local_topic[:, 0] = fresh[:, 0]
    for t in range(1, seq_len):
        local_topic[:, t] = np.where(switch[:, t], fresh[:, t], local_topic[:, t - 1])
    workflow_topic = bundle_of[:, None] * wpb + local_topic
    actions = workflow_topic * a_block + rng.integers(
        0, a_block, size=(n_patients, seq_len)
    )
    noise = rng.random((n_patients, seq_len)) < spec.noise_rate
    actions[noise] = rng.integers(0, spec.action_vocab_size, size=int(noise.sum()))

    # Diagnosis codes: i.i.d. draws from the bundle's phenotype topics with
    # a decreasing within-block weight so top terms are distinguishable.
    weights = 1.0 / (np.arange(c_block) + 1.0)
    weights /= weights.sum()
    local_p = rng.integers(0, ppb, size=(n_patients, n_codes))
    phenotype_topic = bundle_of[:, None] * ppb + local_p
    ranks = rng.choice(c_block, size=(n_patients, n_codes), p=weights)
    codes = phenotype_topic * c_block + ranks
    code_noise = rng.random((n_patients, n_codes)) < spec.noise_rate
    codes[code_noise] = rng.integers(0, spec.code_vocab_size, size=int(code_noise.sum()))

    event_lines = ["patient_id,order_key,actor_role,action_reason"]
    for i, pid in enumerate(patient_ids):
        row = actions[i]
        event_lines.extend(
            f"{pid},{t},{_action_label_parts(a)[0]},{_action_label_parts(a)[1]}"
            for t, a in enumerate(row.tolist())
        )
    diagnosis_lines = ["patient_id,code"]
    for i, pid in enumerate(patient_ids):
        diagnosis_lines.extend(f"{pid},{_code_name(c)}" for c in codes[i].tolist())

    workflow_terms = []
    for w in range(spec.n_workflow_topics):
        block = range(w * a_block, (w + 1) * a_block)
        label = lambda a: "|".join(_action_label_parts(a))
        workflow_terms.append({label(a): 1.0 / a_block for a in block})
    phenotype_terms = []
    for p in range(spec.n_phenotype_topics):
        block = range(p * c_block, (p + 1) * c_block)
        phenotype_terms.append(
            {_code_name(c): float(weights[r]) for r, c in enumerate(block)}
        )

    truth = GroundTruth(
        patient_bundle={pid: int(b) for pid, b in zip(patient_ids, bundle_of)},
        workflow_topic_terms=workflow_terms,
        phenotype_topic_terms=phenotype_terms,
        bundle_workflow_topics=[
            list(range(b * wpb, (b + 1) * wpb)) for b in range(spec.n_bundles)
        ],
        bundle_phenotype_topics=[
            list(range(b * ppb, (b + 1) * ppb)) for b in range(spec.n_bundles)
        ],
    )
    return "\n".join(event_lines) + "\n", "\n".join(diagnosis_lines) + "\n", truth


def _atom_vectors(model: TopicModel, planted: list[dict[str, float]]):
    """Project learned and planted topics into a shared single-term space.

    A learned subsequence term spreads its probability evenly over its
    member actions.
    """
    atoms: dict[str, int] = {}
    for dist in planted:
        for atom in dist:
            atoms.setdefault(atom, len(atoms))
    for term in model.vocab:
        parts = (term,) if isinstance(term, str) else term
        for atom in parts:
            atoms.setdefault(atom, len(atoms))
    learned = np.zeros((model.k, len(atoms)))
    for j, term in enumerate(model.vocab):
        parts = (term,) if isinstance(term, str) else term
        share = 1.0 / len(parts)
        for atom in parts:
            learned[:, atoms[atom]] += model.phi[:, j] * share
    planted_mat = np.zeros((len(planted), len(atoms)))
    for i, dist in enumerate(planted):
        for atom, prob in dist.items():
            planted_mat[i, atoms[atom]] = prob
    return learned, planted_mat


def _similarity_matrix(model: TopicModel, planted: list[dict[str, float]]) -> np.ndarray:
    learned, planted_mat = _atom_vectors(model, planted)
    ln = np.linalg.norm(learned, axis=1)
    pn = np.linalg.norm(planted_mat, axis=1)
    denom = np.outer(ln, pn)
    denom[denom == 0] = 1.0
    return (learned @ planted_mat.T) / denom


def match_topics(
    model: TopicModel, planted: list[dict[str, float]]
) -> tuple[float, dict[int, int]]:
    """Max-weight one-to-one matching of learned to planted topics.

    Returns the mean matched cosine similarity and the learned -> planted
    assignment (every learned topic is labeled; topics beyond the matching
    take their nearest planted topic).
    """
    if model.k < len(planted):
        raise UsageError("model has fewer topics than planted")
    sim = _similarity_matrix(model, planted)
    rows, cols = linear_sum_assignment(-sim)
    assignment = {int(r): int(c) for r, c in zip(rows, cols)}
    score = float(sim[rows, cols].mean())
    for t in range(model.k):
        if t not in assignment:
            assignment[t] = int(np.argmax(sim[t]))
    return score, assignment


def align_topics(model: TopicModel, planted: list[dict[str, float]]) -> float:
    """Mean cosine similarity of optimally matched (learned, planted) pairs."""
    score, _ = match_topics(model, planted)
    return score


def clustering_agreement(
    found: ClusterReport, truth: GroundTruth, phenotype_model: TopicModel
) -> float:
    """Adjusted Rand index between found phenotype clusters and planted bundles."""
    _, assignment = match_topics(phenotype_model, truth.phenotype_topic_terms)
    planted_bundle = {}
    for bundle, topic_ids in enumerate(truth.bundle_phenotype_topics):
        for t in topic_ids:
            planted_bundle[t] = bundle

    found_label: dict[str, int] = {}
    for idx, cluster in enumerate(found.clusters):
        for pid in cluster.phenotype_topics:
            found_label[pid] = idx

    labels_true, labels_found = [], []
    for t in range(phenotype_model.k):
        node = f"p{t}"
        if node not in found_label:
            raise DataError(f"cluster report does not cover phenotype topic {node}")
        labels_true.append(planted_bundle[assignment[t]])
        labels_found.append(found_label[node])
    return float(adjusted_rand_score(labels_true, labels_found))
