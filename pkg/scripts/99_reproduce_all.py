from __future__ import annotations
from noc_sentinel.pipeline import steps as s
import argparse

"""
Entry point for reproducing the IDS scenario end-to-end.

Simulates benign and flooded periodic traffic, trains the shape dictionary,
runs detection on the held-out traces, scores it and finally clusters the
synthetic shape benchmark. Step ranges are controlled by CLI arguments.
"""

def _parse_args():
    p = argparse.ArgumentParser(description="Reproduce the simulation, training, detection and benchmark steps.")
    p.add_argument("--from-step", type=int, default=0, choices=range(0, 5))
    p.add_argument("--to-step", type=int, default=4, choices=range(0, 5))
    return p.parse_args()


def main():
    args = _parse_args()
    s.run_steps(args.from_step, args.to_step)

if __name__ == "__main__":
    main()
