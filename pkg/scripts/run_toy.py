"""Toy problem experiments: the main run, the hidden-objective variant and the
constant-adaptation run followed by a clean rerun.

    python3 scripts/run_toy.py [--out runs/toy]
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

from szoqq.core import AlgorithmConfig, SmoothnessParams, kkt_residual
from szoqq.driver import run
from szoqq.problems import ToyProblem, prepare_run

SETTINGS = AlgorithmConfig(mu=1e-3, eta=1e-2, lambda_bound=1.5)


def solve(problem, smoothness, objective_constants=None, config=SETTINGS):
    prep = prepare_run(problem, smoothness, objective_constants)
    t0 = time.perf_counter()
    report, records = run(prep.oracle, config, prep.x0, prep.smoothness)
    seconds = time.perf_counter() - t0
    x = report.x_tilde[: problem.dimension]
    res = kkt_residual(prep.truth, report.x_tilde, report.lambda_tilde)
    infeasible = sum(bool(np.any(prep.truth.constraints(s.point) > 0)) for s in prep.oracle.sample_log)
    return {
        "reason": report.reason.value,
        "k_tilde": report.k_tilde,
        "x": x.tolist(),
        "objective": problem.objective(x),
        "lambda_inf": float(report.lambda_tilde.max(initial=0.0)),
        "kkt_residual": res.max_residual,
        "samples": prep.oracle.n_point_queries,
        "infeasible_samples": infeasible,
        "final_L": report.smoothness.L.tolist(),
        "final_M": report.smoothness.M.tolist(),
        "seconds": seconds,
        "f0_trace": [r.f0 for r in records],
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/toy")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    results = {
        "known_objective": solve(ToyProblem(), SmoothnessParams.uniform(3, 5, 3)),
        "hidden_objective": solve(ToyProblem(objective_known=False), SmoothnessParams.uniform(3, 5, 3), (5.0, 3.0)),
        "adaptation": solve(ToyProblem(), SmoothnessParams.uniform(3, 0.2, 0.2),
                            config=AlgorithmConfig(mu=1e-3, eta=1e-2, lambda_bound=1.5, max_iterations=3000)),
    }
    grown = results["adaptation"]
    results["rerun_with_grown_constants"] = solve(
        ToyProblem(), SmoothnessParams(grown["final_L"], grown["final_M"])
    )

    for name, r in results.items():
        print(f"{name:28s} {r['reason']:18s} k={r['k_tilde']:4d} f0={r['objective']:.3e} "
              f"|lambda|={r['lambda_inf']:.4f} kkt={r['kkt_residual']:.2e} samples={r['samples']:4d} "
              f"infeasible={r['infeasible_samples']} L_max={max(r['final_L']):.2g} time={r['seconds']:.2f}s")
    (out / "toy_results.json").write_text(json.dumps(results, indent=2) + "\n")
    print(f"wrote {out / 'toy_results.json'}")


if __name__ == "__main__":
    main()
