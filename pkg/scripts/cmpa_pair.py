"""Constrained mountain pass on S = 40 between two CSDM minimisers.

    python3 scripts/cmpa_pair.py --w1 results/csdm-1.2.field --w2 results/csdm-1.4.field
"""

import argparse
import pathlib

from vkdshell import io
from vkdshell.mountainpass import MpConfig
from vkdshell.pipelines import ProblemConfig, constrained_mountain_pass

p = argparse.ArgumentParser()
p.add_argument("--w1", required=True)
p.add_argument("--w2", required=True)
p.add_argument("--C", type=float, default=40.0)
p.add_argument("--p", type=int, default=40)
p.add_argument("--out", default="results")
args = p.parse_args()
out = pathlib.Path(args.out)
out.mkdir(parents=True, exist_ok=True)

ctx = ProblemConfig().context()
w1, w2 = io.load_field(args.w1, ctx.grid), io.load_field(args.w2, ctx.grid)
cp = constrained_mountain_pass(ctx, args.C, w1, w2, MpConfig(p=args.p))
print(f"status={cp.status} lambda={cp.lam:.6f} S={cp.S:.5f} E={cp.E:.5f} F={cp.F:.5f} method={cp.method}")
io.save_field(cp.w, out / "cmpa.field", ctx.grid)
io.write_table(out / "cmpa.csv", [("cmpa", cp.lam, cp.S, cp.E, cp.F, cp.method)])
