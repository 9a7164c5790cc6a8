"""Control benchmark through the command line, then a rollout check against
the stored true-model optimum.

    python3 scripts/run_control.py [--config configs/control.json] [--out runs/control]
"""

import argparse
import json
from pathlib import Path

from szoqq import cli
from szoqq.problems import ControlProblem

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs/control.json"))
    ap.add_argument("--out", default="runs/control")
    args = ap.parse_args()
    trace = Path(args.out) / "trace.csv"

    code = cli.main(["run", "--config", args.config, "--trace", str(trace)])
    report = json.loads(cli.report_path_for(trace).read_text())
    audit = cli.verify_run(trace, "control")

    p = ControlProblem()
    init = p.rollout(p.u_feasible_init)
    final = p.rollout(report["x_original"])
    ref = p.reference()["reference_cost"]
    print(f"exit code            {code}")
    print(f"initial cost         {init.cost:.6f}")
    print(f"final cost           {final.cost:.6f}")
    print(f"true-model optimum   {ref:.6f}  (gap {final.cost - ref:.2e})")
    print(f"max constraint       {final.constraint_values.max():.3e}")
    print(f"iterations           {report['k_tilde']}")
    print(f"samples              {audit['samples']} ({audit['infeasible_samples']} infeasible)")
    print("final inputs         " + " ".join(f"{v:+.4f}" for v in report["x_original"]))


if __name__ == "__main__":
    main()
