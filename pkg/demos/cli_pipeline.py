"""Run the whole command-line pipeline on a tiny cohort in a scratch folder.

This is equivalent to typing the commands below in a shell, with the
eitml entry point installed.
"""

import shlex
import tempfile
from pathlib import Path

from eitml.cli import cli_main

with tempfile.TemporaryDirectory() as tmp:
    d = Path(tmp)
    steps = [
        f"synth --subjects-healthy 2 --subjects-nonhealthy 3 --breaths-healthy 30 --breaths-nonhealthy 45 --seed 2 --out {d}/cohort",
        f"extract --manifest {d}/cohort/manifest.csv --out {d}/features.csv",
        f"evaluate --features {d}/features.csv --scenario both --runs 3 --classifiers RndForest,LDA --budget 2 --out {d}/report.json",
        f"report --report {d}/report.json",
        f"importance --report {d}/report.json --top 5",
        f"distributions --features {d}/features.csv --names ratio_right_left,GI_global",
    ]
    for step in steps:
        print(f"$ eitml {step.replace(str(d), '.')}", flush=True)
        status = cli_main(shlex.split(step))
        if status:
            raise SystemExit(status)
        print()
