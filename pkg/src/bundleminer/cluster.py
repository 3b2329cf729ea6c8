"""Modularity and Louvain community detection over the topic graph."""

from __future__ import annotations

import json
import random
from collections import defaultdict
from dataclasses import dataclass, field

from .assoc import PHENOTYPE, TopicGraph
from .errors import DataError, InternalError, UsageError

# Gains below this are treated as floating-point noise and do not trigger moves.
MIN_GAIN = 1e-12


@dataclass
class Partition:
    assignment: dict[str, int]  # node id -> dense 0-based community id

    def communities(self) -> dict[int, list[str]]:
        groups: dict[int, list[str]] = defaultdict(list)
        for node, com in self.assignment.items():
            groups[com].append(node)
        return {c: sorted(members) for c, members in groups.items()}


@dataclass
class Cluster:
    id: int
    phenotype_topics: list[str]
    workflow_topics: list[str]


@dataclass
class ClusterReport:
    clusters: list[Cluster]
    modularity_q: float
    excluded_communities: list[list[str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "modularity": self.modularity_q,
            "clusters": [
                {
                    "id": c.id,
                    "phenotype_topics": c.phenotype_topics,
                    "workflow_topics": c.workflow_topics,
                }
                for c in self.clusters
            ],
            "excluded": self.excluded_communities,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "ClusterReport":
        return cls(
            clusters=[
                Cluster(c["id"], c["phenotype_topics"], c["workflow_topics"])
                for c in doc["clusters"]
            ],
            modularity_q=doc["modularity"],
            excluded_communities=doc["excluded"],
        )


def _level_arrays(graph: TopicGraph):
    """Adjacency (off-diagonal) plus doubled self-loop weights."""
    adj = graph.adjacency()
    loops = {node: 0.0 for node in adj}
    return adj, loops


def _modularity_level(adj, loops, assignment) -> float:
    strength = {
        v: sum(adj[v].values()) + loops.get(v, 0.0) for v in adj
    }
    m2 = sum(strength.values())
    if m2 <= 0:
        raise DataError("empty graph")
    sigma_in: dict[int, float] = defaultdict(float)
    sigma_tot: dict[int, float] = defaultdict(float)
    for v in adj:
        c = assignment[v]
        sigma_tot[c] += strength[v]
        sigma_in[c] += loops.get(v, 0.0)
        for u, w in adj[v].items():
            if assignment[u] == c:
                sigma_in[c] += w
    return sum(
        sigma_in[c] / m2 - (sigma_tot[c] / m2) ** 2 for c in sigma_tot
    )


def modularity(graph: TopicGraph, partition: Partition) -> float:
    """Newman modularity Q of a node partition on a weighted graph."""
    missing = set(graph.node_kinds) - set(partition.assignment)
    if missing:
        raise UsageError(f"partition does not cover nodes: {sorted(missing)}")
    adj, loops = _level_arrays(graph)
    return _modularity_level(adj, loops, partition.assignment)


def _local_moving(adj, loops, m2, rng):
    nodes = sorted(adj)
    com = {v: i for i, v in enumerate(nodes)}
    strength = {v: sum(adj[v].values()) + loops.get(v, 0.0) for v in nodes}
    sigma_tot: dict[int, float] = defaultdict(float)
    for v in nodes:
        sigma_tot[com[v]] += strength[v]

    moved_any = False
    improved = True
    while improved:
        improved = False
        order = list(nodes)
        rng.shuffle(order)
        for v in order:
            c_old = com[v]
            weight_to: dict[int, float] = defaultdict(float)
            for u, w in adj[v].items():
                weight_to[com[u]] += w
            sigma_tot[c_old] -= strength[v]
            best_c = c_old
            best_gain = weight_to.get(c_old, 0.0) - strength[v] * sigma_tot[c_old] / m2
            # Scan candidates in ascending community id so equal positive
            # gains resolve to the lowest id; strict comparison keeps the
            # current community on zero gain.
            for c in sorted(weight_to):
                if c == c_old:
                    continue
                gain = weight_to[c] - strength[v] * sigma_tot[c] / m2
                if gain > best_gain + MIN_GAIN:
                    best_c, best_gain = c, gain
            com[v] = best_c
            sigma_tot[best_c] += strength[v]
            if best_c != c_old:
                improved = True
                moved_any = True
    return com, moved_any


def _aggregate(adj, loops, com):
    """Collapse communities to single nodes; internal weight becomes a loop."""
    new_ids: dict[int, int] = {}
    for v in sorted(adj):
        new_ids.setdefault(com[v], len(new_ids))
    agg_adj: dict[int, dict[int, float]] = {c: {} for c in new_ids.values()}
    agg_loops: dict[int, float] = {c: 0.0 for c in new_ids.values()}
    for v in adj:
        cv = new_ids[com[v]]
        agg_loops[cv] += loops.get(v, 0.0)
        for u, w in adj[v].items():
            cu = new_ids[com[u]]
            if cu == cv:
                agg_loops[cv] += w  # each internal edge visited twice -> doubled
            else:
                agg_adj[cv][cu] = agg_adj[cv].get(cu, 0.0) + w
    # loops collected the internal weight twice already except original loops,
    # which were stored doubled; both conventions agree.
    for v in agg_adj:
        agg_adj[v] = {u: w for u, w in agg_adj[v].items()}
    return agg_adj, agg_loops, new_ids


def louvain(graph: TopicGraph, seed: int = 0) -> Partition:
    """Two-phase Louvain heuristic, deterministic for a fixed seed."""
    if not graph.node_kinds:
        raise UsageError("graph has no nodes")
    if graph.total_weight() <= 0:
        raise DataError("empty graph")
    rng = random.Random(seed)
    adj, loops = _level_arrays(graph)
    m2 = sum(sum(nbrs.values()) for nbrs in adj.values()) + sum(loops.values())

    node_to_current = {v: v for v in graph.node_kinds}
    q_prev = None
    while True:
        com, moved = _local_moving(adj, loops, m2, rng)
        q_now = _modularity_level(adj, loops, com)
        if q_prev is not None and q_now < q_prev - 1e-9:
            raise InternalError("modularity decreased across a Louvain pass")
        q_prev = q_now
        if not moved:
            final = {v: com[node_to_current[v]] for v in node_to_current}
            break
        adj, loops, new_ids = _aggregate(adj, loops, com)
        node_to_current = {
            v: new_ids[com[node_to_current[v]]] for v in node_to_current
        }
        if len(adj) == 1:
            final = {v: 0 for v in node_to_current}
            break

    # Renumber communities densely, ordered by their smallest member node id.
    relabel: dict[int, int] = {}
    for v in sorted(final):
        relabel.setdefault(final[v], len(relabel))
    return Partition({v: relabel[c] for v, c in final.items()})


def best_of_seeds(graph: TopicGraph, seeds: list[int]) -> tuple[Partition, float]:
    """Run louvain once per seed and keep the highest-Q partition."""
    if not seeds:
        raise UsageError("need at least one seed")
    best = None
    for seed in seeds:
        partition = louvain(graph, seed)
        q = modularity(graph, partition)
        if best is None or q > best[1] + MIN_GAIN:
            best = (partition, q)
    return best


def extract_phenotype_clusters(partition: Partition, graph: TopicGraph) -> ClusterReport:
    """Per community: phenotype members and their co-clustered workflow topics.

    Communities containing no phenotype topic are reported separately
    rather than discarded.
    """
    clusters: list[Cluster] = []
    excluded: list[list[str]] = []
    for com_id, members in sorted(partition.communities().items()):
        phenotypes = [n for n in members if graph.node_kinds[n] == PHENOTYPE]
        workflows = [n for n in members if graph.node_kinds[n] != PHENOTYPE]
        if phenotypes:
            clusters.append(Cluster(len(clusters), phenotypes, workflows))
        else:
            excluded.append(members)
    return ClusterReport(
        clusters=clusters,
        modularity_q=modularity(graph, partition),
        excluded_communities=excluded,
    )
