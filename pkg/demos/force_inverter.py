"""A compliant force inverter.

Pushing the left midline to the right should pull the right midline to the
left. Only the upper half of the square is meshed; the bottom edge is a
symmetry line. The objective is the negative output displacement plus a
volume price. Starting with a cheap price lets material settle into a
working mechanism first; once the output displacement beats the price
(J < 0) the price is raised to its final value.
"""
from pathlib import Path

from toposplit.cli import config_from_dict, run_case

cfg = config_from_dict({"problem": "inverter", "nx": 40, "ny": 40, "optimizer": {"max_iter": 400}})
case = run_case(cfg, Path("demo_out") / "inverter_40")
s = case.summary
print(f"{s['status']} after {s['iterations']} iterations")
print(f"output work {s['output']:.4f} (negative: the output moves against the input)")
print(f"objective {s['J']:.4f}  volume {s['V']:.3f}")

# mirror the half-model to show the whole mechanism
img = case.image[::-1]
full = list(img) + list(img[::-1])
for row in full[::2]:
    print("".join(" .:-=+*#%@"[min(9, int(10 * v))] for v in row))
