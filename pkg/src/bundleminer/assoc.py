"""Workflow-phenotype association matrix and the bipartite topic graph.

Association between a workflow topic and a phenotype topic is the cosine
similarity of their per-patient explanation vectors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InternalError

WORKFLOW = "workflow"
PHENOTYPE = "phenotype"


@dataclass
class AssociationMatrix:
    workflow_topic_ids: list[str]
    phenotype_topic_ids: list[str]
    values: np.ndarray  # |W| x |P|, entries in [0, 1]

    def save(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["workflow_topic"] + self.phenotype_topic_ids)
            for wid, row in zip(self.workflow_topic_ids, self.values):
                writer.writerow([wid] + [f"{v:.12g}" for v in row])

    @classmethod
    def load(cls, path) -> "AssociationMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise DataError(f"{path}: empty association matrix")
        phenotype_ids = rows[0][1:]
        workflow_ids = [r[0] for r in rows[1:]]
        values = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
        return cls(workflow_ids, phenotype_ids, values)


@dataclass
class TopicGraph:
    """Weighted undirected bipartite graph over workflow and phenotype topics."""

    node_kinds: dict[str, str]                 # node id -> WORKFLOW | PHENOTYPE
    edges: dict[tuple[str, str], float] = field(default_factory=dict)

    @property
    def nodes(self) -> list[str]:
        return sorted(self.node_kinds)

    def total_weight(self) -> float:
        return sum(self.edges.values())

    def adjacency(self) -> dict[str, dict[str, float]]:
        adj: dict[str, dict[str, float]] = {node: {} for node in self.node_kinds}
        for (u, v), w in self.edges.items():
            adj[u][v] = w
            adj[v][u] = w
        return adj

    def check_bipartite(self) -> None:
        for u, v in self.edges:
            if u == v:
                raise InternalError(f"self-loop on {u}")
            if self.node_kinds[u] == self.node_kinds[v]:
                raise InternalError(f"edge {u}-{v} does not cross the bipartition")


def association(
    phi_w_explanations,
    phi_p_explanations,
    workflow_topic_ids: list[str] | None = None,
    phenotype_topic_ids: list[str] | None = None,
) -> AssociationMatrix:
    """Cosine similarity of every workflow vs phenotype explanation vector.

    A zero-norm vector (possible only for empty documents everywhere)
    yields association 0 rather than NaN.
    """
    w = np.atleast_2d(np.asarray(phi_w_explanations, dtype=float))
    p = np.atleast_2d(np.asarray(phi_p_explanations, dtype=float))
    if w.shape[1] != p.shape[1]:
        raise DataError(
            f"explanation vector length mismatch: {w.shape[1]} vs {p.shape[1]}"
        )
    w_norms = np.linalg.norm(w, axis=1)
    p_norms = np.linalg.norm(p, axis=1)
    denom = np.outer(w_norms, p_norms)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(denom > 0, (w @ p.T) / np.where(denom > 0, denom, 1.0), 0.0)
    values = np.clip(values, 0.0, 1.0)
    if workflow_topic_ids is None:
        workflow_topic_ids = [f"w{i}" for i in range(w.shape[0])]
    if phenotype_topic_ids is None:
        phenotype_topic_ids = [f"p{j}" for j in range(p.shape[0])]
    return AssociationMatrix(list(workflow_topic_ids), list(phenotype_topic_ids), values)


def build_topic_graph(assoc: AssociationMatrix, weight_threshold: float = 0.0) -> TopicGraph:
    """One edge per association value strictly above the threshold.

    All workflow and phenotype nodes are present even when isolated.
    """
    if weight_threshold < 0:
        raise DataError("weight_threshold must be >= 0")
    node_kinds = {wid: WORKFLOW for wid in assoc.workflow_topic_ids}
    node_kinds.update({pid: PHENOTYPE for pid in assoc.phenotype_topic_ids})
    graph = TopicGraph(node_kinds=node_kinds)
    for i, wid in enumerate(assoc.workflow_topic_ids):
        for j, pid in enumerate(assoc.phenotype_topic_ids):
            value = float(assoc.values[i, j])
            if value > weight_threshold:
                graph.edges[(wid, pid)] = value
    graph.check_bipartite()
    return graph
