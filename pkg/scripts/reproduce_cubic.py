"""Univariate cubic on [-1, 1], T = 10: relative error of the inner approximation per degree.

Usage: python scripts/reproduce_cubic.py [--extended] [--out table.json]
Default degree 16 (about 10 s); --extended adds 20, 24, 28 (minutes, and the
highest degrees may stall numerically).
"""
import argparse

from _common import run

ap = argparse.ArgumentParser()
ap.add_argument("--extended", action="store_true")
ap.add_argument("--out")
args = ap.parse_args()
degrees = [8, 12, 16] + ([20, 24, 28] if args.extended else [])
run("cubic", [(d, d) for d in degrees], out=args.out)
