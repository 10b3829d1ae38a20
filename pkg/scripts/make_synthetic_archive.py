#!/usr/bin/env python3
"""Generate a synthetic multispectral archive for pipeline experiments.

Writes six-band PNG sequences with a correlated Gaussian background and a
single sequence carrying a small bright patch in two bands, plus the JSON
lines manifest the rest of the tooling consumes.
"""

import argparse
from pathlib import Path

from rxtriage.synthetic import DEFAULT_SEED, make_archive


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", type=Path, help="directory to create the archive in")
    parser.add_argument("--sequences", type=int, default=50)
    parser.add_argument("--width", type=int, default=140)
    parser.add_argument("--height", type=int, default=100)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument(
        "--anomaly-index",
        type=int,
        default=None,
        help="which sequence carries the patch (default: 17, clamped to range)",
    )
    parser.add_argument(
        "--cal-targets", type=int, default=0, help="extra calibration-target sequences"
    )
    return parser.parse_args()


def main():
    args = parse_args()
    anomaly_index = args.anomaly_index
    if anomaly_index is None:
        anomaly_index = min(17, args.sequences - 1)
    archive = make_archive(
        args.out,
        n_sequences=args.sequences,
        width=args.width,
        height=args.height,
        seed=args.seed,
        anomaly_index=anomaly_index,
        cal_target_count=args.cal_targets,
    )
    print(f"manifest={archive.manifest_path}")
    print(f"sequences={len(archive.sequence_ids)}")
    print(f"anomaly={archive.anomaly_sequence_id}")
    print(f"patch_origin={archive.patch_origin[0]},{archive.patch_origin[1]}")


if __name__ == "__main__":
    main()
