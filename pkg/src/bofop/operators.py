"""Finite bofop-signals: a kernel of fibers over a weighted vertex space plus
a bounded feature signal, with graph constructors, generators, and axiom checks.

A signal holds: vertex_weights (a probability vector), an n x n nonnegative
kernel K whose row i is the fiber over vertex i, and an n x d feature matrix
with entries in [-1, 1]. The operator acts by (Af)(i) = sum_j K[i][j] f(j).
"""

from __future__ import annotations

import ast
import json
import warnings
from dataclasses import dataclass

import numpy as np

SUM = "sum"
NORMALIZED_SUM = "normalized_sum"
SYMMETRIC_AVERAGE = "symmetric_average"
AGGREGATIONS = (SUM, NORMALIZED_SUM, SYMMETRIC_AVERAGE)

ERDOS_RENYI = "erdos_renyi"
GRAPHON_SAMPLE = "graphon_sample"
EQUATOR = "equator"
RING = "ring"
COMPLETE = "complete"


@dataclass(frozen=True, eq=False)
class FiniteBofopSignal:
    """Vertex weights, fiber kernel, and feature signal on n vertices.

    The constructor checks shapes and finiteness plus the probability
    normalization of vertex_weights. The bofop axioms (self-adjointness,
    positivity, feature range) are checked by validate_bofop, which is
    report-only so that violating objects can be built and inspected.
    """

    n: int
    vertex_weights: np.ndarray
    kernel: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one vertex")
        w = np.array(self.vertex_weights, dtype=float).ravel()
        k = np.array(self.kernel, dtype=float)
        f = np.array(self.features, dtype=float)
        if f.ndim == 1:
            f = f.reshape(-1, 1)
        if w.shape != (self.n,):
            raise ValueError(f"vertex_weights must have shape ({self.n},)")
        if k.shape != (self.n, self.n):
            raise ValueError(f"kernel must have shape ({self.n}, {self.n})")
        if f.shape[0] != self.n or f.ndim != 2:
            raise ValueError(f"features must have shape ({self.n}, d)")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(k)) and np.all(np.isfinite(f))):
            raise ValueError("all entries must be finite")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("vertex_weights must be nonnegative and sum to 1")
        for arr in (w, k, f):
            arr.flags.writeable = False
        object.__setattr__(self, "vertex_weights", w)
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "features", f)

    @property
    def d(self) -> int:
        return self.features.shape[1]


def from_graph(n, edges, features, aggregation, vertex_weights=None) -> FiniteBofopSignal:
    """Build a bofop-signal from an undirected weighted edge list.

    SUM keeps raw weights, NORMALIZED_SUM divides by n, SYMMETRIC_AVERAGE is
    the degree-symmetrized kernel D^(-1/2) W D^(-1/2) with zero rows for
    isolated vertices. Vertex weights default to uniform.
    """
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {aggregation!r}")
    adj = np.zeros((n, n))
    seen = {}
    for edge in edges:
        if len(edge) != 3:
            raise ValueError(f"edge must be (i, j, weight), got {edge!r}")
        i, j, w = int(edge[0]), int(edge[1]), float(edge[2])
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"vertex index out of range in edge {edge!r}")
        if w < 0 or not np.isfinite(w):
            raise ValueError(f"negative or non-finite weight in edge {edge!r}")
        key = (min(i, j), max(i, j))
        if key in seen and seen[key] != w:
            raise ValueError(f"inconsistent duplicate edge {key} with weights {seen[key]} and {w}")
        seen[key] = w
        adj[i, j] = w
        adj[j, i] = w
    if aggregation == SUM:
        kernel = adj
    elif aggregation == NORMALIZED_SUM:
        kernel = adj / n
    else:
        deg = adj.sum(axis=1)
        inv_sqrt = np.zeros(n)
        nz = deg > 0
        inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
        kernel = inv_sqrt[:, None] * adj * inv_sqrt[None, :]
    if vertex_weights is None:
        vertex_weights = np.full(n, 1.0 / n)
    return FiniteBofopSignal(n, vertex_weights, kernel, features)


def infty_norm(signal: FiniteBofopSignal) -> float:
    """Largest fiber mass, max_i sum_j K[i][j]; equals the sup-norm operator bound."""
    return float(signal.kernel.sum(axis=1).max())


def apply_operator(signal: FiniteBofopSignal, values) -> np.ndarray:
    """Integrate values against every fiber: out[i] = sum_j K[i][j] values[j]."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] != signal.n:
        raise ValueError(f"signal has {signal.n} vertices, values has leading size {values.shape[0]}")
    return signal.kernel @ values


@dataclass(frozen=True)
class ValidationReport:
    self_adjoint: bool
    self_adjoint_violation: float
    positive: bool
    positivity_violation: float
    features_in_range: bool
    feature_violation: float

    @property
    def passed(self) -> bool:
        return self.self_adjoint and self.positive and self.features_in_range

    def as_dict(self) -> dict:
        return {
            "self_adjoint": self.self_adjoint,
            "self_adjoint_violation": self.self_adjoint_violation,
            "positive": self.positive,
            "positivity_violation": self.positivity_violation,
            "features_in_range": self.features_in_range,
            "feature_violation": self.feature_violation,
            "passed": self.passed,
        }


def validate_bofop(signal: FiniteBofopSignal, tol=1e-9) -> ValidationReport:
    """Check the bofop axioms and report the worst violation of each.

    Self-adjointness is the bilinear-form identity on the indicator basis:
    w_i K[i][j] = w_j K[j][i] for all pairs.
    """
    w = signal.vertex_weights
    k = signal.kernel
    weighted = w[:, None] * k
    sa_violation = float(np.abs(weighted - weighted.T).max())
    pos_violation = float(max(0.0, -k.min()))
    feat_violation = float(max(0.0, np.abs(signal.features).max() - 1.0))
    return ValidationReport(
        self_adjoint=sa_violation <= tol,
        self_adjoint_violation=sa_violation,
        positive=pos_violation <= tol,
        positivity_violation=pos_violation,
        features_in_range=feat_violation <= tol,
        feature_violation=feat_violation,
    )


def permute_bofop(signal: FiniteBofopSignal, perm) -> FiniteBofopSignal:
    """Relabel vertices: new vertex i is old vertex perm[i]."""
    perm = np.asarray(perm, dtype=int)
    if sorted(perm.tolist()) != list(range(signal.n)):
        raise ValueError("perm must be a permutation of range(n)")
    return FiniteBofopSignal(
        signal.n,
        signal.vertex_weights[perm],
        signal.kernel[np.ix_(perm, perm)],
        signal.features[perm],
    )


def disjoint_union(a: FiniteBofopSignal, b: FiniteBofopSignal) -> FiniteBofopSignal:
    """Stack two signals side by side; fibers never cross the two parts.

    Vertex weights are halved so they stay a probability vector.
    """
    if a.d != b.d:
        raise ValueError("feature dimensions differ")
    n = a.n + b.n
    kernel = np.zeros((n, n))
    kernel[: a.n, : a.n] = a.kernel
    kernel[a.n :, a.n :] = b.kernel
    return FiniteBofopSignal(
        n,
        np.concatenate([a.vertex_weights, b.vertex_weights]) / 2.0,
        kernel,
        np.vstack([a.features, b.features]),
    )


# ---------------------------------------------------------------- generators


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for a random bofop-signal; everything is determined by the seed.

    kind/params: erdos_renyi {n, p}, graphon_sample {n, kernel_expr},
    equator {m, band_eps}, ring {n}, complete {n}.
    features: {"mode": "constant", "value": ...} | {"mode": "uniform", "dim": d}
    | {"mode": "list", "values": [[...]]}; default constant 1.
    The equator construction fixes its own row normalization, so the
    aggregation field is ignored for that kind.
    """

    kind: str
    params: dict
    aggregation: str = SUM
    features: dict | None = None
    seed: int = 0


_EXPR_NAMES = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "minimum": np.minimum,
    "maximum": np.maximum,
    "pi": np.pi,
}


def _check_kernel_ast(expr):
    """Reject everything but arithmetic over u, v, and the named helpers.

    Specs travel in config files, so the formula is data, not code: no
    attribute access, no subscripts, no calls outside the whitelist."""
    tree = ast.parse(expr, mode="eval")
    allowed = set(_EXPR_NAMES) | {"u", "v"}
    for node in ast.walk(tree):
        if isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name)
                    and node.func.id in _EXPR_NAMES and not node.keywords):
                raise ValueError("only whitelisted function calls are allowed")
        elif isinstance(node, ast.Name):
            if node.id not in allowed:
                raise ValueError(f"name {node.id!r} is not defined")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)):
                raise ValueError("only numeric constants are allowed")
        elif not isinstance(node, (ast.Expression, ast.BinOp, ast.UnaryOp,
                                   ast.operator, ast.unaryop, ast.Load)):
            raise ValueError(f"{type(node).__name__} is not allowed")


def _edge_probabilities(expr, n, latents):
    env = {"__builtins__": {}}
    env.update(_EXPR_NAMES)
    u, v = np.meshgrid(latents, latents, indexing="ij")
    env["u"] = u
    env["v"] = v
    try:
        _check_kernel_ast(expr)
        out = eval(expr, env)  # the walk above pinned the grammar
    except Exception as exc:
        raise ValueError(f"invalid kernel expression {expr!r}: {exc}") from exc
    probs = np.broadcast_to(np.asarray(out, dtype=float), (n, n)).copy()
    if not np.all(np.isfinite(probs)) or probs.min() < -1e-9 or probs.max() > 1 + 1e-9:
        raise ValueError(f"kernel expression {expr!r} must take values in [0, 1]")
    return np.clip(probs, 0.0, 1.0)


def _materialize_features(features, n, rng):
    features = features or {"mode": "constant", "value": 1.0}
    mode = features.get("mode")
    if mode == "constant":
        value = np.atleast_1d(np.asarray(features.get("value", 1.0), dtype=float))
        out = np.tile(value, (n, 1))
    elif mode == "uniform":
        out = rng.uniform(-1.0, 1.0, (n, int(features.get("dim", 1))))
    elif mode == "list":
        out = np.asarray(features["values"], dtype=float)
        if out.ndim == 1:
            out = out.reshape(-1, 1)
        if out.shape[0] != n:
            raise ValueError(f"feature list has {out.shape[0]} rows, graph has {n} vertices")
    else:
        raise ValueError(f"unknown feature mode {mode!r}")
    if np.abs(out).max(initial=0.0) > 1.0:
        raise ValueError("features must lie in [-1, 1]")
    return out


def _generate_structure(spec: GeneratorSpec, rng):
    """Return ("edges", n, edge list) or ("kernel", n, matrix)."""
    kind = spec.kind
    params = spec.params
    if kind == ERDOS_RENYI:
        n, p = int(params["n"]), float(params["p"])
        if not (0.0 <= p <= 1.0) or n < 1:
            raise ValueError("erdos_renyi needs n >= 1 and p in [0, 1]")
        iu, ju = np.triu_indices(n, k=1)
        mask = rng.random(iu.shape[0]) < p
        edges = [[int(i), int(j), 1.0] for i, j in zip(iu[mask], ju[mask])]
        return "edges", n, edges
    if kind == GRAPHON_SAMPLE:
        n = int(params["n"])
        if n < 1:
            raise ValueError("graphon_sample needs n >= 1")
        latents = rng.uniform(0.0, 1.0, n)
        probs = _edge_probabilities(str(params["kernel_expr"]), n, latents)
        iu, ju = np.triu_indices(n, k=1)
        mask = rng.random(iu.shape[0]) < probs[iu, ju]
        edges = [[int(i), int(j), 1.0] for i, j in zip(iu[mask], ju[mask])]
        return "edges", n, edges
    if kind == EQUATOR:
        m, eps = int(params["m"]), float(params["band_eps"])
        if m < 1 or not (0.0 < eps < 1.0):
            raise ValueError("equator needs m >= 1 and band_eps in (0, 1)")
        points = rng.normal(size=(m, 3))
        points /= np.linalg.norm(points, axis=1, keepdims=True)
        band = np.abs(points @ points.T) <= eps
        np.fill_diagonal(band, False)
        deg = band.sum(axis=1)
        if np.any(deg == 0):
            warnings.warn(
                f"equator sample has {int((deg == 0).sum())} isolated points; "
                "their fibers are empty"
            )
        kernel = np.zeros((m, m))
        nz = deg > 0
        kernel[nz] = band[nz] / deg[nz, None]
        return "kernel", m, kernel
    if kind == RING:
        n = int(params["n"])
        if n < 1:
            raise ValueError("ring needs n >= 1")
        edges = []
        if n == 2:
            edges = [[0, 1, 1.0]]
        elif n >= 3:
            edges = [[i, (i + 1) % n, 1.0] for i in range(n)]
        return "edges", n, edges
    if kind == COMPLETE:
        n = int(params["n"])
        if n < 1:
            raise ValueError("complete needs n >= 1")
        iu, ju = np.triu_indices(n, k=1)
        edges = [[int(i), int(j), 1.0] for i, j in zip(iu, ju)]
        return "edges", n, edges
    raise ValueError(f"unknown generator kind {kind!r}")


def generate_graph_dict(spec: GeneratorSpec) -> dict:
    """Generate and return the JSON-serializable graph form of a bofop-signal.

    The edge form carries {"n", "edges", "aggregation", "features"}; the
    equator kind is row-normalized and not expressible as an aggregated edge
    list, so it carries a full {"kernel"} matrix instead.
    """
    rng = np.random.default_rng(spec.seed)
    form, n, payload = _generate_structure(spec, rng)
    features = _materialize_features(spec.features, n, rng)
    out = {"n": n, "features": features.tolist()}
    if form == "edges":
        if spec.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {spec.aggregation!r}")
        out["edges"] = payload
        out["aggregation"] = spec.aggregation
    else:
        out["kernel"] = payload.tolist()
    return out


def bofop_from_graph_dict(d: dict) -> FiniteBofopSignal:
    """Read the graph JSON form: either edges + aggregation, or a raw kernel."""
    n = int(d["n"])
    vertex_weights = d.get("vertex_weights")
    if "kernel" in d:
        if "edges" in d or "aggregation" in d:
            raise ValueError("graph dict must carry either a kernel or edges, not both")
        kernel = np.asarray(d["kernel"], dtype=float)
        if np.any(kernel < 0):
            raise ValueError("kernel entries must be nonnegative")
        if vertex_weights is None:
            vertex_weights = np.full(n, 1.0 / n)
        return FiniteBofopSignal(n, vertex_weights, kernel, np.asarray(d["features"], dtype=float))
    return from_graph(n, d["edges"], d["features"], d["aggregation"], vertex_weights)


def generate(spec: GeneratorSpec) -> FiniteBofopSignal:
    return bofop_from_graph_dict(generate_graph_dict(spec))


def load_graph(path) -> FiniteBofopSignal:
    with open(path) as f:
        return bofop_from_graph_dict(json.load(f))


def save_graph_dict(d: dict, path):
    with open(path, "w") as f:
        json.dump(d, f, sort_keys=True)
        f.write("\n")
