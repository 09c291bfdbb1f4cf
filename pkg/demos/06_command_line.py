"""
Driving experiments from config files
=====================================

The ``isp`` command reads an INI preset, applies overrides and writes CSV
files next to a JSON manifest. Here it is called in-process.
"""

import json
import tempfile
from pathlib import Path

from isp.cli import main

configs = Path(__file__).resolve().parent.parent / "configs"
out = Path(tempfile.mkdtemp()) / "exp2"

code = main(["polyfit", str(configs / "exp2.cfg"), "--output-dir", str(out)])
print("exit status:", code)
manifest = json.loads((out / "manifest.json").read_text())
print("files:", [f["name"] for f in manifest["files"]])
print("selected degrees:", manifest["summary"]["selected_degrees"])
print((out / "polyfit_table.csv").read_text().splitlines()[:4])

# A negative noise level is rejected before anything is written.
print("exit status:", main(["run", str(configs / "exp2.cfg"),
                            "-o", "noise.epsilons=-0.1", "--output-dir", str(out / "bad")]))
