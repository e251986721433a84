"""Desk-scale experiment runners: convergence of sampled graph sequences,
fineness of the action metric vs the mover's distance, readout continuity
against the certified constant, and the Hoeffding skeleton of the
generalization bound. Reports serialize deterministically: identical configs
give byte-identical CSV and JSON.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .mpnn import MpnnModel, forward_bofop, lipschitz_certificate, model_from_dict
from .operators import (
    EQUATOR,
    ERDOS_RENYI,
    GRAPHON_SAMPLE,
    NORMALIZED_SUM,
    SUM,
    SYMMETRIC_AVERAGE,
    GeneratorSpec,
    _EXPR_NAMES,
    bofop_from_graph_dict,
    generate,
    generate_graph_dict,
    infty_norm,
)
from .profiles import action_metric_estimate
from .wl import didm_movers_distance

CONVERGENCE = "convergence"
FINENESS = "fineness"
CONTINUITY = "continuity"
GENERALIZATION = "generalization"
KINDS = (CONVERGENCE, FINENESS, CONTINUITY, GENERALIZATION)

CSV = "csv"
JSON = "json"
SVG = "svg"


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    kind: str
    generators: tuple
    sizes: tuple = ()
    depth: int = 2
    k_max: int = 3
    num_samples: int = 16
    seeds: tuple = (0,)
    pairs: int = 10
    noise: float = 0.01
    epsilon_action: float = 0.05
    epsilon_didm: float = 0.1
    model: dict | None = None
    models: tuple = ()
    labels: tuple = (1.0, -1.0)
    decay_reps: int = 30
    hoeffding_n: int = 1000
    hoeffding_reps: int = 1000
    deviation_k: float = 0.1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        object.__setattr__(self, "generators", tuple(dict(g) for g in self.generators))
        sizes = tuple(int(n) for n in self.sizes)
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("size schedule must be strictly increasing")
        object.__setattr__(self, "sizes", sizes)
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds or any(s < 0 for s in seeds):
            raise ValueError("seeds must be explicit nonnegative integers")
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "models", tuple(dict(m) for m in self.models))
        object.__setattr__(self, "labels", tuple(float(y) for y in self.labels))


_CONFIG_FIELDS = (
    "kind", "generators", "sizes", "depth", "k_max", "num_samples", "seeds",
    "pairs", "noise", "epsilon_action", "epsilon_didm", "model", "models",
    "labels", "decay_reps", "hoeffding_n", "hoeffding_reps", "deviation_k",
)


def config_from_dict(d: dict) -> ExperimentConfig:
    unknown = set(d) - set(_CONFIG_FIELDS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**d)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "kind": cfg.kind,
        "generators": [dict(g) for g in cfg.generators],
        "sizes": list(cfg.sizes),
        "depth": cfg.depth,
        "k_max": cfg.k_max,
        "num_samples": cfg.num_samples,
        "seeds": list(cfg.seeds),
        "pairs": cfg.pairs,
        "noise": cfg.noise,
        "epsilon_action": cfg.epsilon_action,
        "epsilon_didm": cfg.epsilon_didm,
        "model": cfg.model,
        "models": [dict(m) for m in cfg.models],
        "labels": list(cfg.labels),
        "decay_reps": cfg.decay_reps,
        "hoeffding_n": cfg.hoeffding_n,
        "hoeffding_reps": cfg.hoeffding_reps,
        "deviation_k": cfg.deviation_k,
    }


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        return config_from_dict(json.load(f))


@dataclass(frozen=True, eq=False)
class RunReport:
    kind: str
    config: dict
    columns: tuple
    rows: tuple
    summary: dict
    wall_time: float = 0.0


def report_to_dict(report: RunReport) -> dict:
    # wall time deliberately left out: serialized reports must be
    # reproducible byte for byte
    return {
        "kind": report.kind,
        "config": report.config,
        "columns": list(report.columns),
        "rows": [list(r) for r in report.rows],
        "summary": report.summary,
        "version": __version__,
    }


def _spec_for(gen: dict, size=None, seed=0) -> GeneratorSpec:
    params = dict(gen.get("params", {}))
    if size is not None:
        params["m" if gen.get("kind") == EQUATOR else "n"] = int(size)
    return GeneratorSpec(
        gen["kind"], params, gen.get("aggregation", SUM), gen.get("features"), seed
    )


# ------------------------------------------------------------------ runners


def run_convergence(cfg: ExperimentConfig) -> RunReport:
    """One generator sampled along the size schedule; consecutive sizes are
    compared in both distances, giving the decay table."""
    if len(cfg.sizes) < 2:
        raise ValueError("convergence needs at least two sizes")
    gen = cfg.generators[0]
    rows = []
    factors = []
    for s in cfg.seeds:
        graphs = {n: generate(_spec_for(gen, n, [s, n])) for n in cfg.sizes}
        didms = []
        for n_a, n_b in zip(cfg.sizes, cfg.sizes[1:]):
            est = action_metric_estimate(
                graphs[n_a], graphs[n_b], cfg.k_max, cfg.num_samples,
                seed=[s, n_a, n_b],
            )
            dd = didm_movers_distance(graphs[n_a], graphs[n_b], cfg.depth)
            rows.append((s, n_a, n_b, float(est.value), float(dd)))
            didms.append(float(dd))
        factors.append(didms[0] / didms[-1] if didms[-1] > 0 else None)
    finite = [f for f in factors if f is not None]
    summary = {
        "didm_decay_factors": factors,
        "min_decay_factor": min(finite) if finite else None,
    }
    return RunReport(
        CONVERGENCE, config_to_dict(cfg),
        ("seed", "n_from", "n_to", "action_distance", "didm_distance"),
        tuple(rows), summary,
    )


def run_fineness(cfg: ExperimentConfig) -> RunReport:
    """Scatter both distances over built-to-be-close pairs (edge-weight noise)
    and independent pairs. Action-close must imply mover's-close; the converse
    may fail and is only counted."""
    gen = cfg.generators[0]
    rows = []
    for s in cfg.seeds:
        for p in range(cfg.pairs):
            base = generate_graph_dict(_spec_for(gen, None, [s, p, 0]))
            if "edges" not in base:
                raise ValueError("fineness perturbation needs an edge-list generator")
            noise_rng = np.random.default_rng([s, p, 1])
            shaken = dict(base)
            shaken["edges"] = [
                [i, j, w + noise_rng.uniform(0.0, cfg.noise)]
                for i, j, w in base["edges"]
            ]
            g_a = bofop_from_graph_dict(base)
            g_b = bofop_from_graph_dict(shaken)
            est = action_metric_estimate(
                g_a, g_b, cfg.k_max, cfg.num_samples, seed=[s, p, 2]
            )
            dd = didm_movers_distance(g_a, g_b, cfg.depth)
            rows.append(("perturbed", s, p, float(est.value), float(dd)))

            g_c = generate(_spec_for(gen, None, [s, p, 3]))
            g_d = generate(_spec_for(gen, None, [s, p, 4]))
            est2 = action_metric_estimate(
                g_c, g_d, cfg.k_max, cfg.num_samples, seed=[s, p, 5]
            )
            dd2 = didm_movers_distance(g_c, g_d, cfg.depth)
            rows.append(("independent", s, p, float(est2.value), float(dd2)))
    implication = sum(
        1 for r in rows if r[3] < cfg.epsilon_action and r[4] >= cfg.epsilon_didm
    )
    converse = sum(
        1 for r in rows if r[4] < cfg.epsilon_didm and r[3] >= cfg.epsilon_action
    )
    perturbed = [r[4] for r in rows if r[0] == "perturbed"]
    summary = {
        "epsilon_action": cfg.epsilon_action,
        "epsilon_didm": cfg.epsilon_didm,
        "implication_violations": implication,
        "converse_counterexamples": converse,
        "max_perturbed_didm": max(perturbed) if perturbed else None,
    }
    return RunReport(
        FINENESS, config_to_dict(cfg),
        ("family", "seed", "pair", "action_distance", "didm_distance"),
        tuple(rows), summary,
    )


def run_continuity(cfg: ExperimentConfig) -> RunReport:
    """Readout gap against both distances over independent pairs, compared to
    the certified constant. Exceedances are findings, not errors: the sampled
    action estimate can undershoot the metric."""
    if cfg.model is None:
        raise ValueError("continuity needs a model")
    model = model_from_dict(cfg.model)
    gen = cfg.generators[0]
    rows = []
    r_max = 0.0
    for s in cfg.seeds:
        for p in range(cfg.pairs):
            g_a = generate(_spec_for(gen, None, [s, p, 0]))
            g_b = generate(_spec_for(gen, None, [s, p, 1]))
            r_max = max(r_max, infty_norm(g_a), infty_norm(g_b))
            _, out_a = forward_bofop(model, g_a)
            _, out_b = forward_bofop(model, g_b)
            delta = float(np.abs(out_a - out_b).sum())
            est = action_metric_estimate(
                g_a, g_b, cfg.k_max, cfg.num_samples, seed=[s, p, 2]
            )
            dd = didm_movers_distance(g_a, g_b, cfg.depth)
            rows.append((s, p, float(dd), float(est.value), delta))
    def max_ratio(idx):
        ratios = [r[4] / r[idx] for r in rows if r[idx] > 1e-12]
        return max(ratios) if ratios else None

    ratio_didm = max_ratio(2)
    ratio_action = max_ratio(3)
    certificate = lipschitz_certificate(model, r_max)
    summary = {
        "max_ratio_didm": ratio_didm,
        "max_ratio_action": ratio_action,
        "certificate": certificate,
        "operator_norm_bound": r_max,
        "didm_within_certificate": ratio_didm is None or ratio_didm <= certificate,
        "action_within_certificate": ratio_action is None or ratio_action <= certificate,
    }
    return RunReport(
        CONTINUITY, config_to_dict(cfg),
        ("seed", "pair", "didm_distance", "action_distance", "readout_delta"),
        tuple(rows), summary,
    )


# ------------------------------------------------- generalization machinery


def _batch_edge_probabilities(expr, latents):
    env = {"__builtins__": {}}
    env.update(_EXPR_NAMES)
    env["u"] = latents[:, :, None]
    env["v"] = latents[:, None, :]
    try:
        out = eval(expr, env)  # restricted names only; config-supplied formula
    except Exception as exc:
        raise ValueError(f"invalid kernel expression {expr!r}: {exc}") from exc
    count, n = latents.shape
    probs = np.broadcast_to(np.asarray(out, dtype=float), (count, n, n)).copy()
    if not np.all(np.isfinite(probs)) or probs.min() < -1e-9 or probs.max() > 1 + 1e-9:
        raise ValueError(f"kernel expression {expr!r} must take values in [0, 1]")
    return np.clip(probs, 0.0, 1.0)


def batch_signals(gen: dict, count: int, rng):
    """Vectorized sampler for a batch of kernels and features from one
    generator; same distribution as generate(), stacked into arrays.

    Supports erdos_renyi and graphon_sample with uniform vertex weights.
    """
    if gen.get("vertex_weights") is not None:
        raise ValueError("batch sampling assumes uniform vertex weights")
    kind = gen["kind"]
    params = gen.get("params", {})
    n = int(params["n"])
    if kind == ERDOS_RENYI:
        probs = float(params["p"])
    elif kind == GRAPHON_SAMPLE:
        latents = rng.uniform(0.0, 1.0, (count, n))
        probs = _batch_edge_probabilities(str(params["kernel_expr"]), latents)
    else:
        raise ValueError(f"batch sampling does not support generator {kind!r}")
    draws = rng.random((count, n, n))
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    weights = np.where(upper, (draws < probs).astype(float), 0.0)
    weights = weights + weights.transpose(0, 2, 1)

    aggregation = gen.get("aggregation", SUM)
    if aggregation == SUM:
        kernels = weights
    elif aggregation == NORMALIZED_SUM:
        kernels = weights / n
    elif aggregation == SYMMETRIC_AVERAGE:
        deg = weights.sum(axis=2)
        scale = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
        kernels = weights * scale[:, :, None] * scale[:, None, :]
    else:
        raise ValueError(f"unknown aggregation {aggregation!r}")

    feat = gen.get("features") or {"mode": "constant", "value": 1.0}
    mode = feat.get("mode")
    if mode == "constant":
        value = np.atleast_1d(np.asarray(feat.get("value", 1.0), dtype=float))
        features = np.tile(value, (count, n, 1))
    elif mode == "uniform":
        features = rng.uniform(-1.0, 1.0, (count, n, int(feat.get("dim", 1))))
    else:
        raise ValueError(f"batch sampling does not support feature mode {mode!r}")
    return kernels, features


def batch_forward(model: MpnnModel, kernels, features):
    """forward_bofop over a stacked batch with uniform vertex weights."""
    count, n, d = features.shape
    hidden = model.updates[0].apply(features.reshape(count * n, d))
    hidden = hidden.reshape(count, n, -1)
    for update in model.updates[1:]:
        agg = kernels @ hidden
        stacked = np.concatenate([hidden, agg], axis=2)
        hidden = update.apply(stacked.reshape(count * n, -1)).reshape(count, n, -1)
    pooled = hidden.mean(axis=1)
    return model.readout.apply(pooled)


def _mixture_loss_sums(models, generators, labels, rng, count):
    """Sum of per-sample losses for each hypothesis over one i.i.d. dataset.

    The class indicator is drawn first, then each class's batch, so the draw
    stream does not depend on the hypothesis set.
    """
    classes = rng.integers(0, 2, count)
    sums = np.zeros(len(models))
    for cls in (0, 1):
        c = int((classes == cls).sum())
        if c == 0:
            continue
        kernels, features = batch_signals(generators[cls], c, rng)
        for mi, model in enumerate(models):
            out = batch_forward(model, kernels, features)[:, 0]
            sums[mi] += float(np.abs(out - labels[cls]).sum()) / 2.0
    return sums


def run_generalization(cfg: ExperimentConfig) -> RunReport:
    """Monte-Carlo deviation decay plus the per-hypothesis Hoeffding envelope.

    Two generators define the classes (labels cfg.labels); the loss of a
    hypothesis on a sample is half its absolute readout error, bounded in
    [0, 1]. The population risk is approximated on a held-out reference of
    100x the largest dataset size.
    """
    if len(cfg.generators) < 2:
        raise ValueError("generalization needs two generators")
    if not cfg.models:
        raise ValueError("generalization needs a hypothesis set")
    if not cfg.sizes:
        raise ValueError("generalization needs a size schedule")
    models = [model_from_dict(m) for m in cfg.models]
    for m in models:
        if m.output_dim != 1:
            raise ValueError("hypotheses must have scalar readouts")
    gens = cfg.generators[:2]
    root = cfg.seeds[0]

    n_ref = 100 * max(cfg.sizes)
    ref_rng = np.random.default_rng([root, 0])
    ref_sums = np.zeros(len(models))
    done = 0
    while done < n_ref:
        chunk = min(65536, n_ref - done)
        ref_sums += _mixture_loss_sums(models, gens, cfg.labels, ref_rng, chunk)
        done += chunk
    reference = ref_sums / n_ref

    rows = []
    medians = []
    for n in cfg.sizes:
        devs = []
        for rep in range(cfg.decay_reps):
            rng = np.random.default_rng([root, 1, n, rep])
            emp = _mixture_loss_sums(models, gens, cfg.labels, rng, n) / n
            sup = float(np.abs(emp - reference).max())
            rows.append(("decay", n, rep, sup))
            devs.append(sup)
        medians.append(float(np.median(devs)))

    if len(cfg.sizes) >= 2 and all(m > 0 for m in medians):
        slope = float(
            np.polyfit(np.log2(cfg.sizes), np.log2(medians), 1)[0]
        )
    else:
        slope = None

    k = cfg.deviation_k
    violations = np.zeros(len(models), dtype=int)
    for rep in range(cfg.hoeffding_reps):
        rng = np.random.default_rng([root, 2, rep])
        emp = _mixture_loss_sums(models, gens, cfg.labels, rng, cfg.hoeffding_n)
        emp /= cfg.hoeffding_n
        violations += (np.abs(emp - reference) > k).astype(int)
    bound = 2.0 * math.exp(-2.0 * k * k * cfg.hoeffding_n)

    summary = {
        "n_ref": n_ref,
        "reference_risks": [float(r) for r in reference],
        "medians": {str(n): m for n, m in zip(cfg.sizes, medians)},
        "slope": slope,
        "hoeffding": {
            "n": cfg.hoeffding_n,
            "k": k,
            "bound": bound,
            "repetitions": cfg.hoeffding_reps,
            "violations": [int(v) for v in violations],
            "max_violations": int(violations.max()),
        },
    }
    return RunReport(
        GENERALIZATION, config_to_dict(cfg),
        ("phase", "n", "rep", "sup_deviation"),
        tuple(rows), summary,
    )


_RUNNERS = {
    CONVERGENCE: run_convergence,
    FINENESS: run_fineness,
    CONTINUITY: run_continuity,
    GENERALIZATION: run_generalization,
}


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    start = time.perf_counter()
    report = _RUNNERS[cfg.kind](cfg)
    return replace(report, wall_time=time.perf_counter() - start)


def check_report(report: RunReport) -> list:
    """Assertion-mode checks: the qualitative claim each experiment exists to
    reproduce, on its own output."""
    failures = []
    s = report.summary
    if report.kind == CONVERGENCE:
        factor = s.get("min_decay_factor")
        if factor is not None and factor < 2.0:
            failures.append(f"didm decay factor {factor:.3g} below 2")
    elif report.kind == FINENESS:
        if s["implication_violations"]:
            failures.append(
                f"{s['implication_violations']} action-close pairs were not "
                "mover's-close"
            )
    elif report.kind == CONTINUITY:
        if not s["didm_within_certificate"]:
            failures.append(
                f"readout/didm ratio {s['max_ratio_didm']:.3g} exceeds "
                f"certificate {s['certificate']:.3g}"
            )
    elif report.kind == GENERALIZATION:
        hoeffding = s["hoeffding"]
        if hoeffding["max_violations"]:
            failures.append(
                f"{hoeffding['max_violations']} deviations exceeded "
                f"k={hoeffding['k']} (bound {hoeffding['bound']:.3g})"
            )
        slope = s.get("slope")
        if slope is None or not (-0.65 <= slope <= -0.35):
            failures.append(f"deviation decay slope {slope} outside -0.5 +/- 0.15")
    return failures


# ----------------------------------------------------------------- emission


def _csv_cell(value) -> str:
    if isinstance(value, str):
        if "," in value or "\n" in value:
            raise ValueError(f"unescapable csv value {value!r}")
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def report_csv(report: RunReport) -> str:
    lines = [",".join(report.columns)]
    for row in report.rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def report_json(report: RunReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _svg_plot(title, xlabel, ylabel, series, logx=False, logy=False) -> str:
    width, height = 640, 440
    ml, mr, mt, mb = 72, 24, 42, 56
    pw, ph = width - ml - mr, height - mt - mb

    def tx(v):
        return math.log10(v) if logx else v

    def ty(v):
        return math.log10(v) if logy else v

    pts = [
        (tx(x), ty(y))
        for _, kind, data in series
        for x, y in data
        if (not logx or x > 0) and (not logy or y > 0)
    ]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    xs, ys = zip(*pts)
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi - x_lo < 1e-12:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi - y_lo < 1e-12:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    def px(v):
        return ml + pw * (tx(v) - x_lo) / (x_hi - x_lo)

    def py(v):
        return mt + ph * (1.0 - (ty(v) - y_lo) / (y_hi - y_lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
        f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>',
        f'<text x="18" y="{mt + ph / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 18 {mt + ph / 2:.1f})">{ylabel}</text>',
    ]
    for i in range(5):
        fx = x_lo + (x_hi - x_lo) * i / 4
        fy = y_lo + (y_hi - y_lo) * i / 4
        vx = 10.0**fx if logx else fx
        vy = 10.0**fy if logy else fy
        gx = ml + pw * i / 4
        gy = mt + ph * (1 - i / 4)
        out.append(
            f'<text x="{gx:.1f}" y="{mt + ph + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{vx:.4g}</text>'
        )
        out.append(
            f'<text x="{ml - 6}" y="{gy + 3:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{vy:.4g}</text>'
        )
    for idx, (label, kind, data) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        drawable = [
            (x, y) for x, y in data if (not logx or x > 0) and (not logy or y > 0)
        ]
        if kind == "line" and len(drawable) > 1:
            path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in drawable)
            out.append(
                f'<polyline points="{path}" fill="none" stroke="{color}" '
                'stroke-width="1.5"/>'
            )
        for x, y in drawable:
            out.append(
                f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}"/>'
            )
        out.append(
            f'<text x="{ml + pw - 6}" y="{mt + 16 + 14 * idx}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="{color}">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def report_svg(report: RunReport) -> str:
    rows = report.rows
    if report.kind == CONVERGENCE:
        series = []
        for s in sorted({r[0] for r in rows}):
            pts = [(r[2], r[4]) for r in rows if r[0] == s]
            series.append((f"didm seed {s}", "line", pts))
            pts = [(r[2], r[3]) for r in rows if r[0] == s]
            series.append((f"action seed {s}", "line", pts))
        return _svg_plot(
            "distance between consecutive sizes", "n", "distance", series
        )
    if report.kind == FINENESS:
        series = [
            (fam, "dots", [(r[3], r[4]) for r in rows if r[0] == fam])
            for fam in ("perturbed", "independent")
        ]
        return _svg_plot(
            "mover's distance vs action estimate",
            "action estimate", "didm distance", series,
        )
    if report.kind == CONTINUITY:
        series = [
            ("vs didm", "dots", [(r[2], r[4]) for r in rows]),
            ("vs action", "dots", [(r[3], r[4]) for r in rows]),
        ]
        return _svg_plot(
            "readout gap vs distance", "distance", "readout gap", series
        )
    medians = report.summary["medians"]
    pts = [(float(n), m) for n, m in sorted(medians.items(), key=lambda kv: int(kv[0]))]
    series = [("median sup deviation", "line", pts)]
    return _svg_plot(
        "Monte-Carlo deviation decay", "dataset size", "deviation", series,
        logx=True, logy=True,
    )


def emit_report(report: RunReport, fmt: str, path) -> str:
    renderers = {CSV: report_csv, JSON: report_json, SVG: report_svg}
    if fmt not in renderers:
        raise ValueError(f"unknown report format {fmt!r}")
    text = renderers[fmt](report)
    with open(path, "w") as f:
        f.write(text)
    return str(path)
