"""Relative change of the second derivatives of the lambda = 1.4 dimple when the domain is enlarged to (200, 200).

The 400 x 400 reference grid is above the direct-solve limit, so it is not Newton-polished.

    python3 scripts/domain_study.py [--sizes 100,100 100,200 200,100]
"""

import argparse
import pathlib

from vkdshell import io
from vkdshell.pipelines import study_domain

p = argparse.ArgumentParser()
p.add_argument("--sizes", nargs="+", default=["100,100", "100,200", "200,100"])
p.add_argument("--out", default="results")
args = p.parse_args()
out = pathlib.Path(args.out)
out.mkdir(parents=True, exist_ok=True)

sizes = tuple(tuple(float(v) for v in s.split(",")) for s in args.sizes)
rows = study_domain(sizes=sizes, progress=lambda r: print(r, flush=True))
cols = ("a", "b", "E", "S", "rel_xx", "rel_yy")
io.write_csv(out / "domain.csv", cols, [tuple(r[c] for c in cols) for r in rows])
