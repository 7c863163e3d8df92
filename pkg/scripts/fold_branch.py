"""Branch of single-dimple solutions through lambda = 1.4, followed down past the fold and up towards lambda = 2.

    python3 scripts/fold_branch.py [--out results]
"""

import argparse
import pathlib

from vkdshell import io
from vkdshell.pipelines import ProblemConfig, branch_from, find_fold, mountain_pass

p = argparse.ArgumentParser()
p.add_argument("--ds", type=float, default=1.0)
p.add_argument("--s-max", type=float, default=400.0)
p.add_argument("--out", default="results")
args = p.parse_args()
out = pathlib.Path(args.out)
out.mkdir(parents=True, exist_ok=True)

ctx = ProblemConfig().context()
start = mountain_pass(ctx, 1.4)


def show(bp):
    print(f"s={bp.s:8.3f} lambda={bp.lam:.6f} E={bp.E:.5f} S={bp.S:.5f} newton={bp.newton_iterations}", flush=True)


down = branch_from(ctx, start, args.s_max, args.ds, direction=-1, lam_bounds=(0.3, 1.95), callback=show, stop_after_fold=True)
k = find_fold(down)
print("fold:", f"lambda={down[k].lam:.6f} at s={down[k].s:.3f}" if k is not None else "not reached")
up = branch_from(ctx, start, args.s_max, args.ds, direction=+1, lam_bounds=(0.3, 1.95), callback=show)
io.write_branch(out / "branch_down.csv", down)
io.write_branch(out / "branch_up.csv", up)
