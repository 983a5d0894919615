"""GA convergence on the Bell state |psi00>: best and mean fitness per generation.

    python3 scripts/bell_convergence.py --out results/bell_trace.csv
"""

import argparse
import time
from pathlib import Path

import numpy as np

from few.cli import RunConfig
from few.measure import compute_few_measure
from few.states import bell_state


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pop-size", type=int)
    ap.add_argument("--generations", type=int)
    ap.add_argument("--out", default="results/bell_trace.csv")
    args = ap.parse_args()

    ga = {k: v for k, v in (("pop_size", args.pop_size), ("generations", args.generations)) if v}
    ga_cfg, inner_cfg = RunConfig(ga=ga).resolve((2, 2), seed=args.seed)
    t0 = time.time()

    def progress(g, trace):
        if g % 10 == 0:
            print(f"gen {g:4d}  best {trace.best_fitness[-1]:.5f}  mean {trace.mean_fitness[-1]:.5f}  {time.time() - t0:.0f}s")

    res = compute_few_measure(bell_state(0, 0), ga_cfg, inner_cfg, progress=progress)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    res.trace.write_csv(out)
    print(f"E = {res.e_value:.5f} (1/sqrt(3) = {1 / np.sqrt(3):.5f}), verdict {res.verdict.value}; trace -> {out}")


if __name__ == "__main__":
    main()
