"""Cycle-accounted comparison of diffusion against synchronous sweeps.

Each method is charged reads, writes, multiplications and additions at
unit prices. The makespan of a parallel run is the busiest processor's
total. Speeds are normalized to row-oriented power iteration with one
processor.
"""

from diteration import BenchConfig, run_bench

res = run_bench(BenchConfig(ks=(1, 2, 4, 8, 16, 32)))
methods = res.config.methods
print("   K  " + "  ".join(f"{m:>9}" for m in methods))
for k in res.config.ks:
    row = "  ".join(f"{res.cell(m, k).normalized_speed:9.2f}" for m in methods)
    print(f"{k:4d}  {row}")

print(f"\none processor: diffusion is {res.ratio(('DI+COST', 1), ('sPI-R', 1)):.2f}x "
      f"faster than row sweeps")
for key, val in res.extras.items():
    print(f"{key} = {val}")
