#!/usr/bin/env python3
"""End-to-end workflow: generate scenes, train the smoke model, label the
held-out split, and score it. Everything lands under the given workspace
directory (default ./runs/pipeline)."""

import sys
from pathlib import Path

from walkseg.cli import main as cli


def main() -> int:
    workspace = Path(sys.argv[1] if len(sys.argv) > 1 else "runs/pipeline")
    workspace.mkdir(parents=True, exist_ok=True)
    data = workspace / "data"
    ckpt = workspace / "model.ckpt"
    preds = workspace / "preds"
    preds.mkdir(exist_ok=True)
    preset = ["--preset", "smoke"]

    if rc := cli(["generate", *preset, str(data)]):
        return rc
    if rc := cli(["train", *preset, "--manifest", str(data / "train.txt"),
                  "--out-checkpoint", str(ckpt)]):
        return rc
    for line in (data / "test.txt").read_text().splitlines():
        img_rel, lab_rel = line.split()
        out = preds / Path(lab_rel).name
        if rc := cli(["infer", *preset, "--checkpoint", str(ckpt),
                      "--image", str(data / img_rel),
                      "--out-labels", str(out), "--steps", "converge"]):
            return rc
    return cli(["eval", "--pred-dir", str(preds), "--gt-dir", str(data / "test"),
                "--out-csv", str(workspace / "metrics.csv"),
                "--trimap-csv", str(workspace / "trimap.csv"),
                "--pr-csv", str(workspace / "pr.csv")])


if __name__ == "__main__":
    sys.exit(main())
