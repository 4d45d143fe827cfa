"""Reversed-time Van der Pol oscillator, T = 1: relative error per degree.

Usage: python scripts/reproduce_vanderpol.py [--extended] [--samples N] [--out table.json]
Degrees 9 and 12 take a few minutes each on one core; --extended adds 15 and 18
(long runs, hours and several GB of memory).
"""
import argparse

from _common import run
from roa_inner import sim

ap = argparse.ArgumentParser()
ap.add_argument("--extended", action="store_true")
ap.add_argument("--samples", type=int, default=10_000)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--out")
args = ap.parse_args()
degrees = [9, 12] + ([15, 18] if args.extended else [])
plan = sim.SamplingPlan("mc", samples=args.samples, seed=args.seed)
run("vanderpol", [(d, d) for d in degrees], plan=plan, out=args.out)
