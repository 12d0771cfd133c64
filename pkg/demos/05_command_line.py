"""The ``clcons`` command line, driven from Python.

Each call below is equivalent to running ``clcons ...`` in a shell; the
return value is the process exit code (0 pass, 1 threshold failure,
2 configuration error, 3 domain violation).
"""

# %% A scratch directory
import json
import tempfile
from pathlib import Path

from clcons.cli import main

work = Path(tempfile.mkdtemp(prefix="clcons-demo-"))

# %% Structural checks of a built-in system
print("exit", main(["check-system", "--system", "euler", "--samples", "500",
                    "--output", str(work / "euler.json")]))
print(json.loads((work / "euler.json").read_text())["compatibility"]["max_residual"])

# %% Generate a field and sweep the commutator with a slope threshold
main(["generate", "--generator", "weierstrass", "--gen-param", "s=0.4",
      "--gen-param", "mode_count=11", "--points", "4096", "--extent", "1",
      "--periodic", "true", "--seed", "7", "--output", str(work / "w.clf")])
code = main(["sweep", "--input", str(work / "w.clf"), "--dyadic", str(2.0**-8), str(2.0**-4),
             "--quantities", "commutator_norm", "gradient_norm",
             "--threshold", "commutator_norm.min_slope=0.6", "--output", str(work / "sweep")])
report = json.loads((work / "sweep" / "report.json").read_text())
print("exit", code, "commutator slope", report["results"]["commutator_norm"]["fit"]["slope"])

# %% A vacuum-forming Euler datum aborts with exit code 3
print("exit", main(["generate", "--system", "euler", "--generator", "fv_solve",
                    "--gen-param", "cells=200", "--gen-param", "left_state=[1.0,-3.0]",
                    "--gen-param", "right_state=[1.0,3.0]", "--gen-param", "end_time=0.2",
                    "--output", str(work / "vacuum.clf")]))
