"""Measure-valued color refinement on bofop-signals.

A node's depth-L invariant is an iterated tree of measures: level 0 is its
feature vector; level j assigns each neighbor's level-(j-1) invariant the
fiber weight of that neighbor. Trees are hash-consed, so structurally equal
invariants are one shared object and the per-level class count never exceeds
the node count. The recursive distance sums an l2 feature term and one
unbalanced-transport term per level, with the previous level's distances as
ground cost; the mover's distance between two signals is a balanced transport
between their node-invariant distributions under that ground.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measures import RECURSIVE, DiscreteMeasure, GroundMetric, ot_unbalanced
from .operators import FiniteBofopSignal

STRUCT_TOL = 1e-12


class ClassicalWlNotApplicable(ValueError):
    """The classical color-refinement oracle needs an unweighted kernel and
    constant features; anything else is out of its scope by definition."""


@dataclass(eq=False)
class IdmMeasure:
    """A measure whose atoms are hash-consed trees (references, not points)."""

    atoms: tuple
    weights: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())


@dataclass(eq=False)
class IdmTree:
    """One iterated-measure class: feature block plus the chain of level measures.

    parent is the truncation to the previous level; measure is the top-level
    one. Structural equality is object identity thanks to hash-consing, so
    these are compared and memoized by id.
    """

    level: int
    feature: np.ndarray
    parent: IdmTree | None = None
    measure: IdmMeasure | None = None
    index: int = 0

    @property
    def level_measures(self) -> list:
        """Measures for levels 1..L, reconstructed from the truncation chain."""
        chain = []
        node = self
        while node.level >= 1:
            chain.append(node.measure)
            node = node.parent
        return chain[::-1]


class IdmUniverse:
    """Hash-consing registry; may span several signals so shared classes merge.

    Level-0 classes merge when features agree within STRUCT_TOL; higher
    classes merge when they share the parent class, the atom classes, and
    weights within STRUCT_TOL. An exact-key table catches the common case,
    with a tolerance scan inside the matching bucket behind it.
    """

    def __init__(self):
        self._level0_exact = {}
        self._level0_all = []
        self._buckets = {}
        self._count = 0

    def _new_tree(self, **kw):
        tree = IdmTree(index=self._count, **kw)
        self._count += 1
        return tree

    def cons_level0(self, feature) -> IdmTree:
        feature = np.asarray(feature, dtype=float)
        key = feature.tobytes()
        hit = self._level0_exact.get(key)
        if hit is not None:
            return hit
        for existing in self._level0_all:
            if existing.feature.shape == feature.shape and np.max(
                np.abs(existing.feature - feature), initial=0.0
            ) <= STRUCT_TOL:
                self._level0_exact[key] = existing
                return existing
        tree = self._new_tree(level=0, feature=feature.copy())
        self._level0_exact[key] = tree
        self._level0_all.append(tree)
        return tree

    def cons(self, parent: IdmTree, atoms: tuple, weights) -> IdmTree:
        weights = np.asarray(weights, dtype=float)
        bucket_key = (id(parent), tuple(id(a) for a in atoms))
        bucket = self._buckets.setdefault(bucket_key, [])
        for existing in bucket:
            if np.max(np.abs(existing.measure.weights - weights), initial=0.0) <= STRUCT_TOL:
                return existing
        tree = self._new_tree(
            level=parent.level + 1,
            feature=parent.feature,
            parent=parent,
            measure=IdmMeasure(atoms, weights),
        )
        bucket.append(tree)
        return tree


@dataclass(eq=False)
class Didm:
    """Distribution of node invariants: one tree per node plus the vertex weights."""

    level: int
    node_idms: tuple
    node_weights: np.ndarray
    universe: IdmUniverse = field(repr=False, default=None)

    def class_histogram(self) -> dict:
        hist = {}
        for tree, w in zip(self.node_idms, self.node_weights):
            hist[tree] = hist.get(tree, 0.0) + float(w)
        return hist


def compute_idms(signal: FiniteBofopSignal, depth: int, universe: IdmUniverse | None = None) -> Didm:
    """Run depth rounds of the measure-valued refinement on one signal."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    uni = universe if universe is not None else IdmUniverse()
    current = [uni.cons_level0(signal.features[i]) for i in range(signal.n)]
    for _ in range(depth):
        nxt = []
        for i in range(signal.n):
            row = signal.kernel[i]
            grouped = {}
            for j in np.nonzero(row)[0]:
                grouped[current[j]] = grouped.get(current[j], 0.0) + float(row[j])
            atoms = tuple(sorted(grouped, key=lambda t: t.index))
            weights = np.array([grouped[a] for a in atoms])
            nxt.append(uni.cons(current[i], atoms, weights))
        current = nxt
    return Didm(depth, tuple(current), signal.vertex_weights, uni)


def _ot_between_idm_measures(ma: IdmMeasure, mb: IdmMeasure, memo) -> float:
    if ma is mb:
        return 0.0
    if (
        len(ma.atoms) == len(mb.atoms)
        and all(x is y for x, y in zip(ma.atoms, mb.atoms))
        and np.max(np.abs(ma.weights - mb.weights), initial=0.0) <= STRUCT_TOL
    ):
        return 0.0
    if ma.total_mass == 0.0 or mb.total_mass == 0.0:
        return abs(ma.total_mass - mb.total_mass)
    cost = np.array(
        [[_distance_memo(x, y, memo) for y in mb.atoms] for x in ma.atoms]
    )
    mu = DiscreteMeasure(1, np.arange(len(ma.atoms), dtype=float).reshape(-1, 1), ma.weights)
    nu = DiscreteMeasure(1, np.arange(len(mb.atoms), dtype=float).reshape(-1, 1), mb.weights)
    return ot_unbalanced(mu, nu, GroundMetric(RECURSIVE, cost))


def _distance_memo(a: IdmTree, b: IdmTree, memo) -> float:
    if a is b:
        return 0.0
    key = (id(a), id(b)) if id(a) <= id(b) else (id(b), id(a))
    hit = memo.get(key)
    if hit is not None:
        return hit
    if a.level == 0:
        val = float(np.sqrt(((a.feature - b.feature) ** 2).sum()))
    else:
        val = _distance_memo(a.parent, b.parent, memo) + _ot_between_idm_measures(
            a.measure, b.measure, memo
        )
    memo[key] = val
    return val


def idm_distance(a: IdmTree, b: IdmTree, level: int, memo: dict | None = None) -> float:
    """Recursive distance between two node invariants of the given level."""
    if a.level != level or b.level != level:
        raise ValueError(f"level mismatch: {a.level} and {b.level} vs requested {level}")
    if a.feature.shape != b.feature.shape:
        raise ValueError("feature dimension mismatch")
    return _distance_memo(a, b, {} if memo is None else memo)


def didm_movers_distance(b1: FiniteBofopSignal, b2: FiniteBofopSignal, depth: int) -> float:
    """Balanced transport between two signals' node-invariant distributions."""
    if b1.d != b2.d:
        raise ValueError("feature dimension mismatch")
    uni = IdmUniverse()
    d1 = compute_idms(b1, depth, uni)
    d2 = compute_idms(b2, depth, uni)
    h1 = d1.class_histogram()
    h2 = d2.class_histogram()
    if set(h1) == set(h2) and all(abs(h1[t] - h2[t]) <= STRUCT_TOL for t in h1):
        return 0.0
    c1 = list(h1)
    c2 = list(h2)
    memo = {}
    cost = np.array([[_distance_memo(x, y, memo) for y in c2] for x in c1])
    mu = DiscreteMeasure(1, np.arange(len(c1), dtype=float).reshape(-1, 1), [h1[t] for t in c1])
    nu = DiscreteMeasure(1, np.arange(len(c2), dtype=float).reshape(-1, 1), [h2[t] for t in c2])
    return ot_unbalanced(mu, nu, GroundMetric(RECURSIVE, cost))


# ---------------------------------------------------------------- refinement ids


def color_refinement_ids(signal: FiniteBofopSignal, rounds: int | None = None) -> np.ndarray:
    """Canonical per-node color ids under weighted color refinement.

    Colors start from exact feature bytes and refine by the multiset of
    (fiber weight, neighbor color) pairs. Ids are ranks of sorted signatures,
    so a vertex relabeling permutes the ids with the vertices; bit-equal
    inputs give bit-equal colorings.
    """
    n = signal.n
    if rounds is None:
        rounds = n
    sigs = [signal.features[i].tobytes() for i in range(n)]
    colors = _rank(sigs)
    for _ in range(rounds):
        sigs = []
        for i in range(n):
            row = signal.kernel[i]
            nz = np.nonzero(row)[0]
            neigh = tuple(sorted((float(row[j]), int(colors[j])) for j in nz))
            sigs.append((int(colors[i]), neigh))
        new = _rank(sigs)
        if np.array_equal(new, colors):
            break
        colors = new
    return colors


def _rank(signatures) -> np.ndarray:
    order = {sig: rank for rank, sig in enumerate(sorted(set(signatures)))}
    return np.array([order[sig] for sig in signatures], dtype=int)


def classical_wl_partition(signal: FiniteBofopSignal, rounds: int) -> np.ndarray:
    """Classical color refinement oracle; unweighted kernels, constant features."""
    positive = signal.kernel[signal.kernel > 0]
    if positive.size and float(positive.max() - positive.min()) > STRUCT_TOL:
        raise ClassicalWlNotApplicable(
            "kernel carries more than one positive weight; classical refinement "
            "does not apply, use the measure-valued invariants instead"
        )
    if signal.n > 1 and np.max(np.abs(signal.features - signal.features[0])) > STRUCT_TOL:
        raise ClassicalWlNotApplicable(
            "features are not constant across nodes; classical refinement "
            "does not apply, use the measure-valued invariants instead"
        )
    n = signal.n
    colors = np.zeros(n, dtype=int)
    adjacency = signal.kernel > 0
    for _ in range(rounds):
        sigs = [
            (int(colors[i]), tuple(sorted(int(colors[j]) for j in np.nonzero(adjacency[i])[0])))
            for i in range(n)
        ]
        colors = _rank(sigs)
    return colors
