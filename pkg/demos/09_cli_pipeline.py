"""
The command-line pipeline
=========================

The same experiments are available from the ``betapref`` command. This
script drives it in-process on a small world inside a temporary directory:
verify, train a lambda sweep, evaluate a checkpoint, and aggregate the runs.
"""

import json
import tempfile
from pathlib import Path

from betapref.cli import main

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    config = tmp / "config.json"
    config.write_text(json.dumps({
        "world": {"dim": 8},
        "train": {"steps": 300},
        "eval": {"n_seeds": 2, "count": 1000},
    }))

    print("$ betapref verify --seed 0")
    print("exit", main(["verify", "--seed", "0"]))

    print("\n$ betapref train --lambda 0.1 --lambda 1.0 ...")
    main(["train", "--config", str(config), "--out", str(tmp / "runs"), "--seed", "0",
          "--lambda", "0.1", "--lambda", "1.0"])
    run = tmp / "runs" / "icrm-lambda0.1-seed0"
    print(sorted(p.name for p in run.iterdir()))

    print("\n$ betapref eval --protocol calibration ...")
    main(["eval", "--config", str(config), "--out", str(tmp / "eval"), "--seed", "0",
          "--checkpoint", str(run / "checkpoint.json"), "--protocol", "calibration"])
    print((tmp / "eval" / "eval-calibration-seed0.csv").read_text())

    print("$ betapref report ...")
    main(["report", "--out", str(tmp / "report"), "--seed", "0", *map(str, sorted((tmp / "runs").iterdir()))])
    print((tmp / "report" / "summary.csv").read_text())
