# A small sweep through the library entry point of the CLI, then an SVG plot.
#
# Equivalent shell command:
#   safeoco --setting linear --horizons 100,1000 --seeds 0..2 --audit \
#       --out sweep.csv --plot sweep.svg

import tempfile
from pathlib import Path

from safeoco.cli import main

out = Path(tempfile.mkdtemp())
code = main(["--setting", "linear", "--horizons", "100,1000", "--seeds", "0..2",
             "--audit", "--out", str(out / "sweep.csv"), "--plot", str(out / "sweep.svg")])
print("exit code", code)
print((out / "sweep.csv").read_text())
print("plot written to", out / "sweep.svg")
