"""
Checking your own metric
========================

A scenario is a small TOML file.  Load it, run every check, and drive the
same thing from the command line with ``glweyl check``.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

from glweyl import load_scenario, run_all

TEXT = """
[scenario]
name = "warped"
n = 2
points = 32

[scenario.box]
x1 = [-1.0, 1.0]
y1 = [-0.5, 0.5]

[metric]
g_1_1 = "exp(x2) + y1^2"
g_2_2 = "2 + sin(x1)"

[weyl]
w_1 = "x2"
w_2 = "0.5*x1"

[gauges]
exprs = ["0", "0.2*x1*x2"]
"""

path = Path(tempfile.mkdtemp()) / "warped.toml"
path.write_text(TEXT)

s = load_scenario(str(path))
reports, skipped = run_all(s)
for r in reports:
    print(f"{r.name:22s} {'pass' if r.passed else 'FAIL'}  worst {r.worst_residual:.2e}")
print("skipped:", skipped)

# the command-line route writes the same information as JSON
report = path.with_suffix(".json")
code = subprocess.call([sys.executable, "-m", "glweyl.cli", "check", str(path),
                        "--report", str(report)])
print("exit code", code, "->", [c["name"] for c in json.loads(report.read_text())["checks"]])
