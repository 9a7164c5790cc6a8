"""Sweep over random convex instances with constants 1.5x the exact ones.

    python3 scripts/run_random_sweep.py [--n 50] [--factor 1.5]
"""

import argparse

import numpy as np

from szoqq.core import AlgorithmConfig, kkt_residual
from szoqq.driver import run
from szoqq.problems import RandomSmoothInstance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--factor", type=float, default=1.5)
    ap.add_argument("--eta", type=float, default=0.1)
    ap.add_argument("--mu", type=float, default=1e-2)
    args = ap.parse_args()

    cfg = AlgorithmConfig(mu=args.mu, eta=args.eta, lambda_bound=1.0, max_iterations=20_000)
    rows = []
    for seed in range(args.n):
        d, m = 2 + seed % 5, 1 + seed % 4
        p = RandomSmoothInstance(seed, d, m)
        oracle = p.make_oracle()
        report, _ = run(oracle, cfg, p.x0, p.smoothness(args.factor))
        res = kkt_residual(p, report.x_tilde, report.lambda_tilde)
        bad = sum(bool(np.any(p.constraints(s.point) > 0)) for s in oracle.sample_log)
        rows.append((seed, d, m, report.reason.value, report.k_tilde, oracle.n_point_queries, bad, res.max_residual))
        print(f"seed={seed:3d} d={d} m={m} {report.reason.value:18s} k={report.k_tilde:5d} "
              f"samples={oracle.n_point_queries:6d} infeasible={bad} kkt={res.max_residual:.2e}")
    done = sum(r[3] == "BothConditionsMet" for r in rows)
    print(f"\n{done}/{len(rows)} certified, {sum(r[6] for r in rows)} infeasible samples, "
          f"max kkt residual {max(r[7] for r in rows):.2e}")


if __name__ == "__main__":
    main()
