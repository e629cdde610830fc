#!/usr/bin/env python3
"""Oracle-affinity ablations: how mean IOU responds to the number of walk
steps and to the neighborhood radius. Writes steps.csv and radius.csv."""

import sys
from pathlib import Path

from walkseg.cli import main as cli


def main() -> int:
    workspace = Path(sys.argv[1] if len(sys.argv) > 1 else "runs/ablation")
    workspace.mkdir(parents=True, exist_ok=True)
    data = workspace / "data"
    if rc := cli(["generate", "--set", "generate.train_count=0",
                  "--set", "generate.test_count=20", str(data)]):
        return rc
    manifest = str(data / "test.txt")
    if rc := cli(["ablate", "--manifest", manifest, "--sweep", "steps",
                  "--steps", "0,1,2,4,8,16,32,converge", "--radius", "5",
                  "--out-csv", str(workspace / "steps.csv")]):
        return rc
    return cli(["ablate", "--manifest", manifest, "--sweep", "radius",
                "--radii", "3,5,10,20",
                "--out-csv", str(workspace / "radius.csv")])


if __name__ == "__main__":
    sys.exit(main())
