"""Human- and machine-readable outputs: topic tables, DOT graphs, run report."""

from __future__ import annotations

import json

from .cluster import ClusterReport
from .errors import DataError
from .ingest import CodeMap
from .topics import TopicModel, top_terms


def _dot_escape(name: str) -> str:
    return name.replace("\\", "\\\\").replace('"', '\\"')


def _cycle_nodes(edges: dict[tuple[str, str], float]) -> set[str]:
    """Nodes that lie on at least one directed cycle (self-loops included)."""
    succ: dict[str, set[str]] = {}
    for a, b in edges:
        succ.setdefault(a, set()).add(b)
    on_cycle: set[str] = set()
    for start in succ:
        # A node is on a cycle iff it can reach itself via >= 1 edge.
        stack = list(succ.get(start, ()))
        seen = set()
        while stack:
            node = stack.pop()
            if node == start:
                on_cycle.add(start)
                break
            if node in seen:
                continue
            seen.add(node)
            stack.extend(succ.get(node, ()))
    return on_cycle


def workflow_transitions(
    model: TopicModel, topic_index: int, n: int = 10, cutoff: float = 0.01
) -> tuple[set[str], dict[tuple[str, str], float]]:
    """Adjacent-pair transitions of the top subsequences, weights merged."""
    nodes: set[str] = set()
    edges: dict[tuple[str, str], float] = {}
    for term, prob in top_terms(model, topic_index, n, cutoff):
        labels = (term,) if isinstance(term, str) else term
        nodes.update(labels)
        for a, b in zip(labels, labels[1:]):
            edges[(a, b)] = edges.get((a, b), 0.0) + prob
    return nodes, edges


def export_workflow_dot(
    model: TopicModel, topic_index: int, n: int = 10, cutoff: float = 0.01
) -> str:
    """Graphviz DOT digraph of one workflow topic.

    Nodes participating in a cycle are displayed with a '+' prefix and
    suffix. A topic whose top terms are all single actions yields a
    node-only graph.
    """
    nodes, edges = workflow_transitions(model, topic_index, n, cutoff)
    looped = _cycle_nodes(edges)
    lines = [f"digraph workflow_topic_{topic_index} {{"]
    for name in sorted(nodes):
        display = f"+{name}+" if name in looped else name
        lines.append(f'  "{_dot_escape(name)}" [label="{_dot_escape(display)}"];')
    for (a, b), weight in sorted(edges.items()):
        lines.append(
            f'  "{_dot_escape(a)}" -> "{_dot_escape(b)}" [label="{weight:.4g}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def topic_table(
    model: TopicModel,
    topic_index: int,
    n: int = 10,
    code_map: CodeMap | None = None,
) -> list[tuple[str, str, float]]:
    """Rows of (term id, description, probability), highest probability first."""
    rows = []
    for term, prob in top_terms(model, topic_index, n):
        if isinstance(term, str) and code_map is not None:
            description = code_map.group_description(term)
        else:
            description = ""
        name = term if isinstance(term, str) else " -> ".join(term)
        rows.append((name, description, prob))
    return rows


def format_topic_table(rows: list[tuple[str, str, float]]) -> str:
    return "\n".join(f"{term}\t{desc}\t{prob:.2f}" for term, desc, prob in rows)


_REQUIRED_STAGES = (
    "config",
    "workflow_sweep",
    "phenotype_sweep",
    "workflow_topic_tables",
    "phenotype_topic_tables",
    "association_matrix_path",
    "cluster_report",
)


def emit_pipeline_report(artifacts: dict) -> tuple[dict, str]:
    """Combine all pipeline artifacts into one JSON document plus a summary.

    The JSON contains only seeds/config and results, never timings, so
    identical runs serialize byte-identically.
    """
    for stage in _REQUIRED_STAGES:
        if stage not in artifacts or artifacts[stage] is None:
            raise DataError(f"missing pipeline stage: {stage}")
    cluster_report: ClusterReport = artifacts["cluster_report"]
    doc = {
        "config": artifacts["config"],
        "workflow_sweep": artifacts["workflow_sweep"],
        "phenotype_sweep": artifacts["phenotype_sweep"],
        "workflow_topic_tables": artifacts["workflow_topic_tables"],
        "phenotype_topic_tables": artifacts["phenotype_topic_tables"],
        "association_matrix_path": artifacts["association_matrix_path"],
        "cluster_report": cluster_report.to_dict(),
    }

    lines = ["== Topic counts =="]
    lines.append(f"workflow topics: {artifacts['workflow_sweep']['chosen_k']}")
    lines.append(f"phenotype topics: {artifacts['phenotype_sweep']['chosen_k']}")
    lines.append("")
    lines.append("== Condition clusters ==")
    lines.append(f"modularity Q = {cluster_report.modularity_q:.4f}")
    for cluster in cluster_report.clusters:
        lines.append(f"cluster c{cluster.id + 1}:")
        lines.append("  phenotype topics: " + ", ".join(cluster.phenotype_topics))
        lines.append("  workflow topics:  " + ", ".join(cluster.workflow_topics))
    if cluster_report.excluded_communities:
        lines.append("communities without phenotype topics:")
        for members in cluster_report.excluded_communities:
            lines.append("  " + ", ".join(members))
    return doc, "\n".join(lines) + "\n"


def dump_report_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"
