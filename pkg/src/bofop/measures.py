"""Discrete measures, exact unbalanced optimal transport, Hausdorff set distance.

Everything here is a finitely supported nonnegative measure on R^m. The
transport solver is an exact LP (HiGHS); no entropic approximation anywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.spatial.distance import cdist

TOL = 1e-9
MERGE_TOL = 1e-12

L1 = "l1"
L2 = "l2"
RECURSIVE = "recursive"


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported measure: atoms (n, ambient_dim) with nonnegative weights (n,).

    Atoms need not be distinct; representations that differ by merging,
    splitting or reordering compare equal through measures_equal().
    A zero-mass measure is valid (an isolated vertex has an empty fiber).
    """

    ambient_dim: int
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.ambient_dim < 1:
            raise ValueError("ambient_dim must be a positive integer")
        atoms = np.array(self.atoms, dtype=float)
        weights = np.array(self.weights, dtype=float).ravel()
        if atoms.size == 0:
            atoms = atoms.reshape(0, self.ambient_dim)
        if atoms.ndim != 2 or atoms.shape[1] != self.ambient_dim:
            raise ValueError(
                f"atoms must have shape (n, {self.ambient_dim}), got {atoms.shape}"
            )
        if weights.shape[0] != atoms.shape[0]:
            raise ValueError("weights and atoms must have the same length")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("weights must be finite and nonnegative")
        atoms.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())


def dirac(point, weight=1.0) -> DiscreteMeasure:
    point = np.atleast_1d(np.asarray(point, dtype=float))
    return DiscreteMeasure(point.shape[0], point.reshape(1, -1), [weight])


def measure_from_dict(d) -> DiscreteMeasure:
    return DiscreteMeasure(int(d["dim"]), d["atoms"], d["weights"])


def measure_to_dict(mu: DiscreteMeasure) -> dict:
    return {
        "dim": mu.ambient_dim,
        "atoms": [[float(x) for x in row] for row in mu.atoms],
        "weights": [float(w) for w in mu.weights],
    }


def load_measure(path) -> DiscreteMeasure:
    with open(path) as f:
        return measure_from_dict(json.load(f))


def canonicalize(mu: DiscreteMeasure) -> DiscreteMeasure:
    """Sort atoms lexicographically, merge atoms within MERGE_TOL, drop zero weights."""
    keep = mu.weights > 0.0
    atoms = mu.atoms[keep]
    weights = mu.weights[keep]
    if atoms.shape[0] == 0:
        return DiscreteMeasure(mu.ambient_dim, atoms, weights)
    order = np.lexsort(atoms.T[::-1])
    atoms = atoms[order]
    weights = weights[order]
    rep_atoms = [atoms[0]]
    rep_weights = [weights[0]]
    for i in range(1, atoms.shape[0]):
        if np.max(np.abs(atoms[i] - rep_atoms[-1])) <= MERGE_TOL:
            rep_weights[-1] += weights[i]
        else:
            rep_atoms.append(atoms[i])
            rep_weights.append(weights[i])
    return DiscreteMeasure(mu.ambient_dim, np.array(rep_atoms), np.array(rep_weights))


def measures_equal(mu: DiscreteMeasure, nu: DiscreteMeasure, weight_tol=TOL) -> bool:
    """Equality of the induced measures, via canonical forms."""
    if mu.ambient_dim != nu.ambient_dim:
        return False
    a = canonicalize(mu)
    b = canonicalize(nu)
    if a.n_atoms != b.n_atoms:
        return False
    if a.n_atoms == 0:
        return True
    if bool(
        np.all(np.abs(a.atoms - b.atoms) <= MERGE_TOL)
        and np.all(np.abs(a.weights - b.weights) <= weight_tol)
    ):
        return True
    # atoms that nearly tie on the sort key can come out of lexsort in either
    # order, so positional comparison alone has false negatives; fall back to
    # an explicit matching, which stays sound because every accepted pair is
    # checked against both tolerances
    used = np.zeros(b.n_atoms, dtype=bool)
    for i in range(a.n_atoms):
        hit = -1
        for j in range(b.n_atoms):
            if (
                not used[j]
                and np.max(np.abs(a.atoms[i] - b.atoms[j])) <= MERGE_TOL
                and abs(a.weights[i] - b.weights[j]) <= weight_tol
            ):
                hit = j
                break
        if hit < 0:
            return False
        used[hit] = True
    return True


@dataclass(frozen=True, eq=False)
class GroundMetric:
    """Ground cost between atoms: L1, L2, or an explicit positional cost matrix.

    A RECURSIVE matrix is tied to one ordered pair of measures: entry [i, j]
    is the cost between atom i of the first and atom j of the second. Atom
    coordinates are ignored in that case (they may be opaque class indices).
    """

    kind: str
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (L1, L2, RECURSIVE):
            raise ValueError(f"unknown ground metric kind {self.kind!r}")
        if self.kind == RECURSIVE:
            if self.matrix is None:
                raise ValueError("RECURSIVE ground needs a cost matrix")
            m = np.array(self.matrix, dtype=float)
            if m.ndim != 2:
                raise ValueError("cost matrix must be 2-dimensional")
            if not np.all(np.isfinite(m)) or np.any(m < 0):
                raise ValueError("cost matrix entries must be finite and nonnegative")
            m.flags.writeable = False
            object.__setattr__(self, "matrix", m)
        elif self.matrix is not None:
            raise ValueError("only RECURSIVE ground carries a matrix")

    def pairwise(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.kind == L1:
            return cdist(x, y, metric="cityblock")
        if self.kind == L2:
            return cdist(x, y, metric="euclidean")
        if self.matrix.shape != (x.shape[0], y.shape[0]):
            raise ValueError(
                f"cost matrix shape {self.matrix.shape} does not match "
                f"atom counts ({x.shape[0]}, {y.shape[0]})"
            )
        return self.matrix


GROUND_L1 = GroundMetric(L1)
GROUND_L2 = GroundMetric(L2)


def _greedy_single_source(mass, cost_row, capacities):
    # one source atom with equality marginal: fill the cheapest targets first
    order = np.argsort(cost_row, kind="stable")
    remaining = mass
    total = 0.0
    for j in order:
        if remaining <= 0.0:
            break
        ship = min(remaining, capacities[j])
        total += ship * cost_row[j]
        remaining -= ship
    return total


def _transport_lp(a, b, cost):
    """Balanced transportation LP with equality marginals, exact HiGHS solve."""
    m, n = cost.shape
    row_marg = sparse.kron(sparse.eye(m, format="csr"), np.ones((1, n)), format="csr")
    col_marg = sparse.kron(np.ones((1, m)), sparse.eye(n, format="csr"), format="csr")
    a_eq = sparse.vstack([row_marg, col_marg], format="csr")
    b_eq = np.concatenate([a, b])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return max(float(res.fun), 0.0)


def ot_unbalanced(mu: DiscreteMeasure, nu: DiscreteMeasure, ground: GroundMetric) -> float:
    """Unbalanced transport cost: ship the lighter measure's full mass as a
    sub-coupling of the heavier one, plus the mass-difference penalty.

    Exact LP value. The definition assumes the first argument is lighter;
    arguments are swapped internally when it is not, which preserves the value.
    """
    if ground.kind != RECURSIVE and mu.ambient_dim != nu.ambient_dim:
        raise ValueError("ambient dimension mismatch")
    penalty = abs(mu.total_mass - nu.total_mass)
    if mu.total_mass == 0.0 or nu.total_mass == 0.0:
        return penalty
    cost = ground.pairwise(mu.atoms, nu.atoms)
    if mu.total_mass > nu.total_mass:
        mu, nu = nu, mu
        cost = cost.T
    # identical measures need no transport (positional identity for RECURSIVE,
    # where reordering would break the cost matrix's index correspondence)
    if ground.kind == RECURSIVE:
        if (
            cost.shape[0] == cost.shape[1]
            and mu.n_atoms == nu.n_atoms
            and np.max(np.abs(np.diag(cost))) <= MERGE_TOL
            and np.all(np.abs(mu.weights - nu.weights) <= MERGE_TOL)
            and np.all(np.abs(mu.atoms - nu.atoms) <= MERGE_TOL)
        ):
            return penalty
    elif measures_equal(mu, nu, weight_tol=MERGE_TOL):
        return penalty
    keep_mu = mu.weights > 0.0
    keep_nu = nu.weights > 0.0
    a = mu.weights[keep_mu]
    b = nu.weights[keep_nu]
    cost = cost[np.ix_(keep_mu, keep_nu)]
    if a.shape[0] == 1:
        return _greedy_single_source(a[0], cost[0], b) + penalty
    if b.shape[0] == 1:
        return float(a @ cost[:, 0]) + penalty
    gap = nu.total_mass - mu.total_mass
    if gap > 0.0:
        cost = np.vstack([cost, np.zeros((1, b.shape[0]))])
        a = np.concatenate([a, [gap]])
    return _transport_lp(a, b, cost) + penalty


def kr_lower_bound(mu: DiscreteMeasure, nu: DiscreteMeasure, test_fn) -> float:
    """Duality lower bound: integral of a 1-Lipschitz test function against mu - nu.

    Balanced inputs only. The caller certifies the Lipschitz property; the
    value never exceeds ot_unbalanced(mu, nu) when that holds.
    """
    if abs(mu.total_mass - nu.total_mass) > TOL:
        raise ValueError("duality bound requires equal total masses")

    def integrate(m):
        return sum(w * float(test_fn(x)) for x, w in zip(m.atoms, m.weights))

    return integrate(mu) - integrate(nu)


def pushforward_measure(mu: DiscreteMeasure, fn) -> DiscreteMeasure:
    """Map atoms pointwise, keep weights, canonicalize. Total mass is unchanged."""
    if mu.n_atoms == 0:
        return mu
    images = [np.atleast_1d(np.asarray(fn(x), dtype=float)).ravel() for x in mu.atoms]
    out_dim = images[0].shape[0]
    if any(img.shape[0] != out_dim for img in images):
        raise ValueError("map output dimension inconsistent across atoms")
    return canonicalize(DiscreteMeasure(out_dim, np.array(images), mu.weights))


def _mean_lower_bound(kind, sums_a, sums_b):
    # a signed coordinate-sum functional is 1-Lipschitz for L1, a unit
    # vector for L2; both give valid W1 lower bounds on balanced pairs
    diff = sums_a - sums_b
    if kind == L1:
        return float(np.abs(diff).sum())
    return float(np.sqrt((diff * diff).sum()))


def hausdorff_set_distance(set_a, set_b, ground: GroundMetric) -> float:
    """Hausdorff distance between two finite sets of measures under transport cost.

    Exact max-of-min over the finite sets. Inner minima are scanned in order
    of a cheap transport lower bound so most LP solves are pruned; pruning
    never changes the value.
    """
    set_a = list(set_a)
    set_b = list(set_b)
    if not set_a or not set_b:
        raise ValueError("both sets must be nonempty")
    if ground.kind == RECURSIVE:
        raise ValueError("set distance needs a coordinate ground metric, not a matrix")
    dims = {m.ambient_dim for m in set_a} | {m.ambient_dim for m in set_b}
    if len(dims) != 1:
        raise ValueError("all measures must share the ambient dimension")

    def stats(ms):
        return [(m.total_mass, m.weights @ m.atoms if m.n_atoms else np.zeros(m.ambient_dim)) for m in ms]

    stats_a = stats(set_a)
    stats_b = stats(set_b)
    cache = {}

    def pair_value(i, j):
        key = (i, j)
        if key not in cache:
            cache[key] = ot_unbalanced(set_a[i], set_b[j], ground)
        return cache[key]

    def lower_bound(i, j):
        mass_a, sum_a = stats_a[i]
        mass_b, sum_b = stats_b[j]
        lb = abs(mass_a - mass_b)
        if abs(mass_a - mass_b) <= MERGE_TOL:
            lb = max(lb, _mean_lower_bound(ground.kind, sum_a, sum_b))
        return lb

    def directed(n_rows, n_cols, value_at, bound_at):
        worst = 0.0
        for i in range(n_rows):
            order = sorted(range(n_cols), key=lambda j: bound_at(i, j))
            best = np.inf
            for j in order:
                if bound_at(i, j) >= best:
                    break
                best = min(best, value_at(i, j))
            worst = max(worst, best)
        return worst

    ab = directed(len(set_a), len(set_b), pair_value, lower_bound)
    ba = directed(
        len(set_b),
        len(set_a),
        lambda j, i: pair_value(i, j),
        lambda j, i: lower_bound(i, j),
    )
    return max(ab, ba)
