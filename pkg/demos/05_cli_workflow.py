"""End-to-end CLI workflow: gen -> run -> run -> compare.

Generates a problem's Matrix Market files plus manifest, runs both
pipelines on the same training seed with dense oracle columns, and diffs
the convergence curves.  Everything lands in ./demo_workdir as the same
plot-ready CSV artifacts the CLI always writes.
"""

import json
import os
import shutil

from eigenbounds.cli import main

workdir = os.path.join(os.path.dirname(__file__), "..", "demo_workdir")
workdir = os.path.abspath(workdir)
shutil.rmtree(workdir, ignore_errors=True)
gen_dir = os.path.join(workdir, "problem")
scm_dir = os.path.join(workdir, "run_scm")
sub_dir = os.path.join(workdir, "run_subspace")

spec = json.dumps({"Q": 3, "N": 100, "delta": 0.25, "seed": 2})
assert main(["gen", "--kind", "random", "--spec", spec,
             "--out", gen_dir]) == 0

manifest = os.path.join(gen_dir, "manifest.json")
common = ["--manifest", manifest, "--train-size", "120", "--train-seed", "4",
          "--eps", "1e-4", "--j-max", "25", "--oracle"]
assert main(["run", *common, "--pipeline", "scm", "--out", scm_dir]) == 0
assert main(["run", *common, "--pipeline", "subspace", "--out", sub_dir]) == 0

print("\n--- compare ---")
assert main(["compare", scm_dir, sub_dir,
             "--out", os.path.join(workdir, "compare.csv")]) == 0

print("\nartifacts:")
for root, _dirs, files in os.walk(workdir):
    for f in sorted(files):
        rel = os.path.relpath(os.path.join(root, f), workdir)
        print(f"  {rel}")
