#!/usr/bin/env python3
"""Run the paper-style experiment configs and render their figures.

Full-scale reproduction (50 Monte Carlo runs for the noisy experiments)
takes hours at desk scale; pass --quick for a 4-run smoke version of each
experiment.  Requires both packages installed: the simulation engine and
the figure renderer (figures/).
"""

import argparse
import subprocess
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
CONFIGS = [
    ("fig1_cnot", ["--y", "mean_trace_distance"]),
    ("fig1_toffoli", ["--y", "mean_trace_distance"]),
    ("fig2_rank2", ["--y", "mean_trace_distance"]),
    ("fig2_fullrank", ["--y", "mean_trace_distance"]),
    ("fig3_plateau", ["--y", "mean_delta"]),
    ("fig4_hybrid", ["--y", "mean_trace_distance"]),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="4 runs per experiment")
    parser.add_argument("--only", help="comma-separated experiment names")
    args = parser.parse_args()
    selected = set(args.only.split(",")) if args.only else None
    for name, fig_flags in CONFIGS:
        if selected and name not in selected:
            continue
        cmd = [sys.executable, "-m", "qproctomo.cli", "simulate",
               "--config", str(REPO / "configs" / f"{name}.ini")]
        if args.quick:
            cmd += ["--runs", "4"]
        print(f"== {name}: {' '.join(cmd)}", flush=True)
        if subprocess.run(cmd, cwd=REPO).returncode != 0:
            return 1
        summary = REPO / "results" / name / f"{name}_summary.csv"
        fig_cmd = [sys.executable, "-m", "tomofig.cli", str(summary),
                   "--out", str(summary.with_suffix(".svg")), "--log-y", *fig_flags]
        print(f"== render: {' '.join(fig_cmd)}", flush=True)
        if subprocess.run(fig_cmd, cwd=REPO).returncode != 0:
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
