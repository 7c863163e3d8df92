"""Constrained minimisers of E on S = 40 from the named seeds, each refined by fixed-S Newton.

    python3 scripts/csdm_catalog.py [--seeds csdm-1.1 csdm-1.6] [--out results]
"""

import argparse
import pathlib
import time

from vkdshell import io
from vkdshell.pipelines import ProblemConfig, constrained_minimizer
from vkdshell.seeds import SEED_CATALOG, seed_from_name

p = argparse.ArgumentParser()
p.add_argument("--C", type=float, default=40.0)
p.add_argument("--seeds", nargs="+", default=sorted(k for k in SEED_CATALOG if k.startswith("csdm-")))
p.add_argument("--out", default="results")
args = p.parse_args()
out = pathlib.Path(args.out)
out.mkdir(parents=True, exist_ok=True)

ctx = ProblemConfig().context()
rows = []
for name in args.seeds:
    t = time.time()
    cp = constrained_minimizer(ctx, args.C, seed_from_name(ctx.grid, name))
    rows.append((name, cp.lam, cp.S, cp.E, cp.F, cp.method))
    io.save_field(cp.w, out / f"{name}.field", ctx.grid)
    print(*rows[-1], f"{time.time() - t:.0f}s", sep="  ", flush=True)
io.write_table(out / "csdm_catalog.csv", rows)
