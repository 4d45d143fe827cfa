"""Low-degree w with a higher-degree v.

Default: cubic on the tighter set [-0.7, 0.7] with deg_w = 6, deg_v = 16.
--vanderpol additionally runs Van der Pol with deg_w = 8, deg_v = 18 (very long run).
"""
import argparse

from _common import run

ap = argparse.ArgumentParser()
ap.add_argument("--vanderpol", action="store_true")
ap.add_argument("--out")
args = ap.parse_args()
run("cubic_low", [(6, 16)], out=args.out)
if args.vanderpol:
    run("vanderpol_low", [(8, 18)])
