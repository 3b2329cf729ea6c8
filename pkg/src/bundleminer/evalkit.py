"""Plausibility-evaluation machinery: random counterpart clusters, Likert
conversion, and the one-way ANOVA significance test.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .errors import DataError
from .seqmine import term_repr
from .topics import TopicModel, top_terms

LIKERT_SCORES = {
    "not at all likely": 0.0,
    "slightly likely": 0.25,
    "moderately likely": 0.5,
    "very likely": 0.75,
    "completely likely": 1.0,
}

SCORE_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)

ARMS = ("inferred", "random")


def likert_to_score(answer_text: str) -> float:
    key = " ".join(answer_text.split()).lower()
    if key not in LIKERT_SCORES:
        raise DataError(f"unrecognized Likert answer {answer_text!r}")
    return LIKERT_SCORES[key]


@dataclass(frozen=True)
class SurveyResponse:
    respondent_id: str
    cluster_id: str
    arm: str
    score: float

    def __post_init__(self):
        if self.arm not in ARMS:
            raise DataError(f"arm must be one of {ARMS}, got {self.arm!r}")
        if self.score not in SCORE_LEVELS:
            raise DataError(f"score {self.score} is not a Likert level")


@dataclass
class AnovaResult:
    mean_difference: float  # mean(inferred) - mean(random)
    f_statistic: float
    p_value: float
    df_between: int
    df_within: int


def load_responses(csv_path) -> list[SurveyResponse]:
    """Responses CSV: respondent_id,cluster_id,arm,answer_text."""
    responses = []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"respondent_id", "cluster_id", "arm", "answer_text"}
        if not required <= set(reader.fieldnames or []):
            raise DataError(f"{csv_path}: header must contain {sorted(required)}")
        for row in reader:
            responses.append(
                SurveyResponse(
                    respondent_id=row["respondent_id"],
                    cluster_id=row["cluster_id"],
                    arm=row["arm"],
                    score=likert_to_score(row["answer_text"]),
                )
            )
    return responses


def f_tail_probability(f_statistic: float, df1: int, df2: int) -> float:
    """Upper-tail probability of the F distribution.

    Uses the regularized incomplete beta function; accurate to well below
    the declared 1e-10 tolerance for the degrees of freedom seen here.
    """
    if math.isinf(f_statistic):
        return 0.0
    x = df2 / (df2 + df1 * f_statistic)
    return float(betainc(df2 / 2.0, df1 / 2.0, x))


def anova_paired_arms(responses: list[SurveyResponse]) -> dict[str, AnovaResult]:
    """One-way fixed-effects ANOVA with arm as the factor, per cluster."""
    by_cluster: dict[str, dict[str, list[float]]] = {}
    for r in responses:
        by_cluster.setdefault(r.cluster_id, {a: [] for a in ARMS})[r.arm].append(r.score)

    results: dict[str, AnovaResult] = {}
    for cluster_id in sorted(by_cluster):
        arms = by_cluster[cluster_id]
        inferred, rand = arms["inferred"], arms["random"]
        if len(inferred) < 2 or len(rand) < 2:
            raise DataError(
                f"cluster {cluster_id}: each arm needs >= 2 responses"
            )
        n1, n2 = len(inferred), len(rand)
        m1, m2 = np.mean(inferred), np.mean(rand)
        grand = (n1 * m1 + n2 * m2) / (n1 + n2)
        ss_between = n1 * (m1 - grand) ** 2 + n2 * (m2 - grand) ** 2
        ss_within = sum((x - m1) ** 2 for x in inferred) + sum(
            (x - m2) ** 2 for x in rand
        )
        df_between, df_within = 1, n1 + n2 - 2
        if ss_within == 0:
            if ss_between == 0:
                f_stat, p = 0.0, 1.0
            else:
                f_stat, p = math.inf, 0.0
        else:
            f_stat = (ss_between / df_between) / (ss_within / df_within)
            p = f_tail_probability(f_stat, df_between, df_within)
        results[cluster_id] = AnovaResult(
            mean_difference=float(m1 - m2),
            f_statistic=float(f_stat),
            p_value=p,
            df_between=df_between,
            df_within=df_within,
        )
    return results


def write_anova_csv(results: dict[str, AnovaResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster", "mean_difference", "f_statistic", "p_value"])
        for cluster_id in sorted(results):
            r = results[cluster_id]
            writer.writerow(
                [cluster_id, f"{r.mean_difference:.12g}", f"{r.f_statistic:.12g}", f"{r.p_value:.12g}"]
            )


@dataclass
class CounterpartCluster:
    topic_indices: list[int]
    diagnoses: dict[int, list[tuple[str, float]]]  # topic index -> (code, prob)

    def total_diagnoses(self) -> int:
        return sum(len(v) for v in self.diagnoses.values())


def generate_random_counterpart(
    inferred_topic_indices: list[int],
    model: TopicModel,
    rng_seed: int,
    n: int = 10,
    cutoff: float = 0.01,
) -> CounterpartCluster:
    """Random cluster matching the inferred cluster's topic and diagnosis counts.

    Samples the same number of topics from the pool of topics outside the
    inferred cluster; each sampled topic is represented by its top-term
    diagnosis list. Lowest-probability terms are trimmed (across the
    whole counterpart) until the total diagnosis count matches.
    """
    inferred = sorted(set(inferred_topic_indices))
    pool = [t for t in range(model.k) if t not in inferred]
    if len(pool) < len(inferred):
        raise DataError(
            f"candidate pool of size {len(pool)} is smaller than the "
            f"inferred cluster ({len(inferred)} topics)"
        )
    target = sum(
        len(top_terms(model, t, n, cutoff)) for t in inferred
    )
    rng = np.random.default_rng(np.uint64(rng_seed & (2**64 - 1)))
    chosen = sorted(rng.choice(pool, size=len(inferred), replace=False).tolist())
    lists = {
        t: [(term_repr(term), p) for term, p in top_terms(model, t, n, cutoff)]
        for t in chosen
    }
    total = sum(len(v) for v in lists.values())
    if total < target:
        raise DataError(
            f"counterpart holds {total} diagnoses, {target - total} short of "
            f"the required {target}"
        )
    # Trim globally lowest-probability terms so highest-probability ones stay.
    while total > target:
        worst = min(
            ((p, t, code) for t, entries in lists.items() for code, p in entries if entries),
        )
        _, t, code = worst
        lists[t] = [(c, p) for c, p in lists[t] if c != code]
        total -= 1
    return CounterpartCluster(topic_indices=chosen, diagnoses=lists)
