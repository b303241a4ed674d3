"""Launch a one-sample collection server for the UI round-trip test.

Writes a tiny fixture corpus (one 64x64 grayscale image, a manifest, an
assignment plan giving sample s0 to annotator a0) into --dir, then serves
it on a free port, announcing PORT=<n> on stdout.
"""
import argparse
import socket
from pathlib import Path

import numpy as np


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--dir", required=True)
    args = parser.parse_args()

    from sgpad.data import Label, Manifest, SampleRecord, save_image, write_manifest
    from sgpad.server import AssignmentPlan, build_app, save_plan

    root = Path(args.dir)
    root.mkdir(parents=True, exist_ok=True)
    ys, xs = np.mgrid[0:64, 0:64]
    image = (xs + ys) / (2 * 63.0)
    image_path = root / "s0.png"
    save_image(image, image_path)
    manifest = Manifest(
        (SampleRecord("s0", str(image_path), Label.BONAFIDE, sensor="fixture"),)
    )
    write_manifest(manifest, root / "manifest.csv")
    plan = AssignmentPlan({"a0": ("s0",)}, annotators_per_sample=2)
    save_plan(plan, root / "plan.json")

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    print(f"PORT={port}", flush=True)

    import uvicorn

    uvicorn.run(
        build_app(manifest, plan, root / "storage"),
        host="127.0.0.1", port=port, log_level="warning",
    )


if __name__ == "__main__":
    main()
