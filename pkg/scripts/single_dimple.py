"""Single-dimple mountain-pass solution at lambda = 1.4 for each discretisation of the mixed derivative.

    python3 scripts/single_dimple.py [--out results] [--full]
"""

import argparse
import pathlib
import time

from vkdshell import io
from vkdshell.pipelines import ProblemConfig, mountain_pass

p = argparse.ArgumentParser()
p.add_argument("--out", default="results")
p.add_argument("--lam", type=float, default=1.4)
p.add_argument("--full", action="store_true", help="also run the transform scheme on the full domain")
args = p.parse_args()
out = pathlib.Path(args.out)
out.mkdir(parents=True, exist_ok=True)

cases = [("quarter", s) for s in ("spectral", "left", "right")] + ([("full", "spectral")] if args.full else [])
rows = []
for boundary, scheme in cases:
    t = time.time()
    ctx = ProblemConfig(boundary=boundary, scheme=scheme).context()
    cp = mountain_pass(ctx, args.lam)
    rows.append((f"{boundary}/{scheme}", cp.lam, cp.S, cp.E, cp.F, cp.method))
    io.save_field(cp.w, out / f"dimple_{boundary}_{scheme}.field", ctx.grid)
    print(*rows[-1], f"{time.time() - t:.0f}s", sep="  ", flush=True)
io.write_table(out / "single_dimple.csv", rows)
