"""Stratified retrieval over the strategy-embedding space.

Groups the archive into semantic clusters with seeded k-means, scores
candidate inspirations either by behavioral complementarity (normalized
Hamming distance between success-bit vectors) or by raw fitness when no
behavior vectors exist, and assembles the inspiration set handed to the
mutation prompt: one pick from the parent's own cluster and one from a
uniformly drawn other cluster, with a best/most-complementary fallback while
the archive is still warming up.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .archive import Archive, ArchiveEntry
from .rng import CountingRng

MAX_KMEANS_ITERATIONS = 100

MODE_WARMUP = "warmup"
MODE_CLUSTERED = "clustered"

ROLE_BEST = "best"
ROLE_DIVERSE = "diverse"
ROLE_INTRA = "intra"
ROLE_CROSS = "cross"


class SelectionError(Exception):
    """Inspiration selection over an inconsistent archive/parent pair."""


@dataclass
class ClusterState:
    """A full partition of the live archive in embedding space."""

    assignments: dict[int, int]
    centroids: np.ndarray
    effective_c: int
    seed: int


@dataclass
class Pick:
    role: str
    entry: ArchiveEntry


@dataclass
class InspirationSet:
    """Parent plus at most two retrieved inspirations with their role tags."""

    parent: ArchiveEntry
    picks: list[Pick]
    mode: str


def cluster(
    embeddings: Mapping[int, Sequence[float]], c: int, seed: int
) -> ClusterState:
    """Partition embeddings into ``min(c, n)`` clusters with seeded k-means.

    Lloyd's iterations run to an assignment fixpoint or 100 rounds, seeded
    k-means++ style from ``seed``. A cluster emptied by an assignment round is
    repaired by reseeding its centroid at the point currently farthest from
    its own centroid. Output is deterministic for fixed inputs and seed; no
    cluster is empty on return.
    """
    if c < 1:
        raise ValueError(f"cluster count must be >= 1, got {c}")
    if not embeddings:
        raise ValueError("cluster() needs at least one embedding")
    ids = sorted(embeddings)
    points = np.asarray([embeddings[i] for i in ids], dtype=float)
    if points.ndim != 2:
        raise ValueError("embeddings must share one dimension")
    n = len(ids)
    k = min(c, n)
    rng = CountingRng(seed)

    centroids = points[_seed_centroids(points, k, rng)].copy()
    labels = np.full(n, -1, dtype=int)
    for _ in range(MAX_KMEANS_ITERATIONS):
        new_labels = _assign(points, centroids)
        repaired = _repair_empty(points, centroids, new_labels, k)
        if not repaired and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for ci in range(k):
            members = points[labels == ci]
            if len(members):
                centroids[ci] = members.mean(axis=0)

    labels = _assign(points, centroids)
    _force_nonempty(points, centroids, labels, k)
    for ci in range(k):
        members = points[labels == ci]
        if len(members):
            centroids[ci] = members.mean(axis=0)

    assignments = {ids[i]: int(labels[i]) for i in range(n)}
    return ClusterState(
        assignments=assignments, centroids=centroids, effective_c=k, seed=seed
    )


def _seed_centroids(points: np.ndarray, k: int, rng: CountingRng) -> list[int]:
    """k-means++ index selection driven by the counting rng."""
    n = len(points)
    chosen = [rng.randrange(n)]
    while len(chosen) < k:
        d2 = np.min(
            ((points[:, None, :] - points[chosen][None, :, :]) ** 2).sum(axis=2),
            axis=1,
        )
        total = float(d2.sum())
        if total <= 0.0:
            remaining = [i for i in range(n) if i not in chosen]
            chosen.append(remaining[rng.randrange(len(remaining))])
            continue
        u = rng.random() * total
        acc = 0.0
        pick = n - 1
        for i in range(n):
            acc += float(d2[i])
            if u < acc:
                pick = i
                break
        chosen.append(pick)
    return chosen


def _assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def _repair_empty(
    points: np.ndarray, centroids: np.ndarray, labels: np.ndarray, k: int
) -> bool:
    """Reseed each empty centroid at the remotest point; True if any repaired."""
    counts = np.bincount(labels, minlength=k)
    empties = [ci for ci in range(k) if counts[ci] == 0]
    if not empties:
        return False
    dist = ((points - centroids[labels]) ** 2).sum(axis=1)
    used: set[int] = set()
    for ci in empties:
        order = sorted(range(len(points)), key=lambda i: (-dist[i], i))
        idx = next(i for i in order if i not in used)
        used.add(idx)
        centroids[ci] = points[idx]
    return True


def _force_nonempty(
    points: np.ndarray, centroids: np.ndarray, labels: np.ndarray, k: int
) -> None:
    """Last-resort reassignment for degenerate (duplicate-heavy) inputs."""
    counts = np.bincount(labels, minlength=k)
    for ci in range(k):
        if counts[ci] > 0:
            continue
        dist = ((points - centroids[labels]) ** 2).sum(axis=1)
        movable = sorted(
            (i for i in range(len(points)) if counts[labels[i]] > 1),
            key=lambda i: (-dist[i], i),
        )
        idx = movable[0]
        counts[labels[idx]] -= 1
        labels[idx] = ci
        counts[ci] += 1
        centroids[ci] = points[idx]


def behavioral_score(b_i: Sequence[int], b_ref: Sequence[int]) -> float:
    """Normalized Hamming distance between two success-bit vectors."""
    if len(b_i) != len(b_ref):
        raise ValueError(
            f"behavior vectors differ in length: {len(b_i)} vs {len(b_ref)}"
        )
    if len(b_i) == 0:
        raise ValueError("behavior vectors must be non-empty")
    return sum(1 for a, b in zip(b_i, b_ref) if a != b) / len(b_i)


def score(candidate: ArchiveEntry, reference: ArchiveEntry | None = None) -> float:
    """Complementarity to the reference when both sides carry behavior
    vectors; plain fitness otherwise."""
    if (
        candidate.behavior_vector is not None
        and reference is not None
        and reference.behavior_vector is not None
    ):
        return behavioral_score(candidate.behavior_vector, reference.behavior_vector)
    return candidate.fitness


def _argmax_by_score(
    pool: list[ArchiveEntry], reference: ArchiveEntry
) -> ArchiveEntry | None:
    """Highest score against the reference; ties break toward the smallest id."""
    best: ArchiveEntry | None = None
    best_score = float("-inf")
    for entry in sorted(pool, key=lambda e: e.id):
        s = score(entry, reference)
        if s > best_score:
            best, best_score = entry, s
    return best


def select_inspirations(
    archive: Archive,
    parent: ArchiveEntry,
    t: int,
    k_warmup: int,
    cluster_state: ClusterState | None,
    rng: CountingRng,
) -> InspirationSet:
    """Pick the two inspirations shown to the mutation prompt.

    Warm-up (``t < k_warmup`` or no cluster state): the global best plus the
    entry most complementary to it. Clustered: the best-scoring sibling from
    the parent's cluster, plus the best-scoring member of one other cluster
    drawn uniformly: exactly one ``rng.randrange`` call over the ascending
    list of other nonempty cluster indices, and the only draw this function
    makes. A slot with no eligible candidate is padded with the best-scoring
    entry from the whole archive (excluding the parent and already-chosen
    picks); with fewer than three live entries, fewer picks are returned.
    """
    if parent.id not in archive:
        raise SelectionError(f"parent id {parent.id} is not live in the archive")

    warmup = t < k_warmup or cluster_state is None
    live = archive.live()
    chosen: list[Pick] = []

    def pad(role: str, reference: ArchiveEntry) -> None:
        taken = {parent.id} | {p.entry.id for p in chosen}
        pool = [e for e in live if e.id not in taken]
        entry = _argmax_by_score(pool, reference)
        if entry is not None:
            chosen.append(Pick(role, entry))

    if warmup:
        best_entry = archive.best()
        if best_entry.id != parent.id:
            chosen.append(Pick(ROLE_BEST, best_entry))
        else:
            pad(ROLE_BEST, best_entry)
        taken = {parent.id, best_entry.id} | {p.entry.id for p in chosen}
        pool = [e for e in live if e.id not in taken]
        diverse = _argmax_by_score(pool, best_entry)
        if diverse is not None:
            chosen.append(Pick(ROLE_DIVERSE, diverse))
        else:
            pad(ROLE_DIVERSE, best_entry)
        return InspirationSet(parent=parent, picks=chosen, mode=MODE_WARMUP)

    assignments = cluster_state.assignments
    if parent.id not in assignments:
        raise SelectionError(f"parent id {parent.id} missing from cluster state")
    c_star = assignments[parent.id]
    members: dict[int, list[ArchiveEntry]] = {}
    for entry_id, ci in assignments.items():
        if entry_id in archive:
            members.setdefault(ci, []).append(archive.get(entry_id))

    intra_pool = [e for e in members.get(c_star, []) if e.id != parent.id]
    intra = _argmax_by_score(intra_pool, parent)
    if intra is not None:
        chosen.append(Pick(ROLE_INTRA, intra))
    else:
        pad(ROLE_INTRA, parent)

    other_clusters = sorted(ci for ci in members if ci != c_star and members[ci])
    if other_clusters:
        c_prime = other_clusters[rng.randrange(len(other_clusters))]
        cross = _argmax_by_score(members[c_prime], parent)
        taken = {parent.id} | {p.entry.id for p in chosen}
        if cross is not None and cross.id not in taken:
            chosen.append(Pick(ROLE_CROSS, cross))
        else:
            pad(ROLE_CROSS, parent)
    else:
        pad(ROLE_CROSS, parent)
    return InspirationSet(parent=parent, picks=chosen, mode=MODE_CLUSTERED)


def export_embeddings_csv(
    archive: Archive,
    cluster_state: ClusterState,
    path: str | os.PathLike[str],
) -> None:
    """Write id, generation, fitness, cluster, e_0..e_{d-1} for live entries."""
    dim = archive.embedding_dim or 0
    header = ["id", "generation", "fitness", "cluster"] + [
        f"e_{j}" for j in range(dim)
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for entry in archive.live():
            writer.writerow(
                [
                    entry.id,
                    entry.generation,
                    repr(entry.fitness),
                    cluster_state.assignments[entry.id],
                ]
                + [repr(x) for x in entry.strategy_embedding]
            )
