"""Drive the command line end to end on files written to a temporary directory.

Writes a small panel, runs ``fit``, ``effects`` and ``check`` and prints
the resulting tables.
Run: python demos/command_line.py
"""
import json
import tempfile
from pathlib import Path

from stavar.cli import main
from stavar.panel import write_covariates, write_edges, write_panel
from stavar.simlab import synthetic_panel

syn = synthetic_panel(rows=3, cols=4, p=2)
root = Path(tempfile.mkdtemp(prefix="stavar-demo-"))
write_panel(syn.panel, root / "y.csv", root / "d.csv")
write_covariates(syn.covs, syn.panel.unit_ids, root / "x.csv")
write_edges(syn.graph, root / "e.csv")
(root / "run.json").write_text(json.dumps({
    "data": {"outcomes": "y.csv", "treatment": "d.csv", "covariates": "x.csv", "edges": "e.csv"},
    "basis": {"kind": "polynomial", "df": 2},
    "mcmc": {"iters": 600, "burnin": 300, "seed": 3},
    "estimands": {"max_lag": 9, "cluster_k": 3},
    "output": "out",
}, indent=2))

config = str(root / "run.json")
for command in ("fit", "effects", "check"):
    code = main([command, "--config", config])
    print(f"stavar {command}: exit {code}")

out = root / "out"
print("\natt.csv")
print((out / "att.csv").read_text())
print("clusters.csv")
print((out / "clusters.csv").read_text())
print(f"all artifacts in {out}: {sorted(p.name for p in out.iterdir())}")
