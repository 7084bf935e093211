"""Stiffest half MBB beam for a given material price.

The beam is clamped by a roller on the left symmetry edge, rests on a
roller at the bottom-right corner and carries a downward point load at the
top-left corner. We minimize compliance plus a volume price with the
two-metric projection method and a reciprocal Hessian model, then print the
design as ASCII art and save it as a PGM image.

    python demos/mbb_beam.py            # 60x20 desk size
    python demos/mbb_beam.py 300 50     # full size, a couple of minutes
"""
import sys
from pathlib import Path

from toposplit.cli import config_from_dict, run_case

nx, ny = (int(a) for a in sys.argv[1:3]) if len(sys.argv) > 2 else (60, 20)
cfg = config_from_dict({"problem": "mbb", "nx": nx, "ny": ny, "beta": 0.06})
case = run_case(cfg, Path("demo_out") / f"mbb_{nx}x{ny}")

s = case.summary
print(f"{s['status']} after {s['iterations']} iterations ({s['backtracks']} backtracks)")
print(f"compliance {s['output']:.3f}  volume {s['V']:.3f}  discreteness {s['discreteness']:.1f}%")

shades = " .:-=+*#%@"
step = max(1, nx // 80)
for row in case.image[::-1][:: max(1, step)]:
    print("".join(shades[min(9, int(10 * v))] for v in row[::step]))
