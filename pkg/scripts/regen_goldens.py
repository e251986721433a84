"""Re-run the pinned golden configs and overwrite tests/golden/*.json.

Run after an intentional change to runner semantics, then review the diff;
the regression test compares future runs against these files.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from bofop.experiments import ExperimentConfig, emit_report, run_experiment
from bofop.mpnn import model_to_dict, random_model

OUT = pathlib.Path(__file__).resolve().parents[1] / "tests" / "golden"

CONSTANT_HALF = {
    "kind": "graphon_sample",
    "params": {"kernel_expr": "0.5"},
    "aggregation": "normalized_sum",
}
ER32 = {
    "kind": "erdos_renyi",
    "params": {"n": 32, "p": 0.5},
    "aggregation": "normalized_sum",
}
ER12_SIGNAL = {
    "kind": "erdos_renyi",
    "params": {"n": 12, "p": 0.5},
    "aggregation": "normalized_sum",
    "features": {"mode": "uniform", "dim": 1},
}
ER8_SPARSE = {
    "kind": "erdos_renyi",
    "params": {"n": 8, "p": 0.25},
    "aggregation": "normalized_sum",
    "features": {"mode": "uniform", "dim": 1},
}
ER8_DENSE = {
    "kind": "erdos_renyi",
    "params": {"n": 8, "p": 0.75},
    "aggregation": "normalized_sum",
    "features": {"mode": "uniform", "dim": 1},
}


def golden_configs():
    rng = np.random.default_rng(0)
    continuity_model = model_to_dict(random_model(rng, 1, [2, 1]))
    rng = np.random.default_rng(1)
    hypotheses = [model_to_dict(random_model(rng, 1, [2, 1])) for _ in range(3)]
    return {
        "convergence": ExperimentConfig(
            kind="convergence", generators=(CONSTANT_HALF,),
            sizes=(8, 16, 32, 64), depth=2, k_max=2, num_samples=16, seeds=(0,),
        ),
        "fineness": ExperimentConfig(
            kind="fineness", generators=(ER32,),
            pairs=3, depth=2, k_max=2, num_samples=6, seeds=(0,), noise=0.01,
        ),
        "continuity": ExperimentConfig(
            kind="continuity", generators=(ER12_SIGNAL,),
            pairs=6, depth=2, k_max=2, num_samples=8, seeds=(0,),
            model=continuity_model,
        ),
        "generalization": ExperimentConfig(
            kind="generalization", generators=(ER8_SPARSE, ER8_DENSE),
            sizes=(250, 1000, 4000), models=hypotheses, seeds=(0,),
            decay_reps=10, hoeffding_n=500, hoeffding_reps=200,
        ),
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, cfg in golden_configs().items():
        report = run_experiment(cfg)
        path = emit_report(report, "json", OUT / f"{name}.json")
        print(f"{path}  ({report.wall_time:.1f}s, {len(report.rows)} rows)")


if __name__ == "__main__":
    main()
