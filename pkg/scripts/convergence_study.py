"""Distance of the one-sided solutions to the transform-based one as the mesh is refined (a = b = 50).

    python3 scripts/convergence_study.py [--steps 0.5 0.4 0.3]
"""

import argparse
import pathlib

from vkdshell import io
from vkdshell.pipelines import study_convergence

p = argparse.ArgumentParser()
p.add_argument("--steps", type=float, nargs="+", default=[0.5, 0.4, 0.3])
p.add_argument("--out", default="results")
args = p.parse_args()
out = pathlib.Path(args.out)
out.mkdir(parents=True, exist_ok=True)

rows = study_convergence(steps=tuple(args.steps), progress=lambda r: print(r, flush=True))
cols = ("dx", "diff_left", "diff_right", "S_left", "S_right", "S_spectral")
io.write_csv(out / "convergence.csv", cols, [tuple(r[c] for c in cols) for r in rows])
