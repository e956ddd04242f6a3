"""Running registered experiments from Python instead of the CLI.

``execute`` returns the summary rows in memory; ``run`` also writes
summary.json and CSV tables, just like ``hypbridge run``.
"""

import tempfile

from hypbridge.experiments import REGISTRY, ExperimentConfig, execute, run, validate

for name, exp in REGISTRY.items():
    print(f"{name:24s} {exp.about}")

# validation never raises; it lists every problem at once
print("\n", validate({"experiment": "cir-rate", "n_paths": 0, "params": {"k": 0.5}}))

cfg = ExperimentConfig.from_dict({"experiment": "gradlog-limit", "params": {"rhos": [20, 40, 80]}})
for row in execute(cfg).rows:
    print(f"{'PASS' if row.passed else 'FAIL'}  {row.quantity}: {row.value}")

small = ExperimentConfig.from_dict(
    {"experiment": "bidisk-counterexample", "seed": 5, "n_paths": 500, "h": 2e-3}
)
with tempfile.TemporaryDirectory() as tmp:
    bundle = run(small, tmp)
    print("\npassed:", bundle.passed, "files:", sorted(p.name for p in bundle.tables.values()))
    print(bundle.tables["bidisk"].read_text())
