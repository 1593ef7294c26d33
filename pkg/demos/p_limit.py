"""
From p-harmonic to infinity-harmonic
====================================

Minimisers of the p-energy on the square ring approach the midrange fixed point
as p grows.  This script solves both on one grid and prints the gap for
p = 2, 4, 8, 16, 32.  The gap stops shrinking once it reaches the discretisation
error of the midrange scheme, which is first order in h.
"""
import numpy as np

from infpot.field import build_grid
from infpot.geometry import ConvexRing, Point, rectangle
from infpot.solver import SolveParams, solve_infinity, solve_p

ring = ConvexRing(rectangle(-1, -1, 1, 1), Point((0.0, 0.0)))
grid = build_grid(ring, 1 / 32)
vinf = solve_infinity(grid, SolveParams(omega=1.5))

for p in (2, 4, 8, 16, 32):
    vp = solve_p(grid, p)
    gap = np.max(np.abs(vp.values - vinf.values)[grid.interior])
    # the p = 2 potential is the log potential near the point, so it sits well below
    print(f"p = {p:2d}   sup |V_p - V_inf| = {gap:.4f}   V_p(0.5, 0) = {vp.sample((0.5, 0.0)):.4f}")
print(f"V_inf(0.5, 0) = {vinf.sample((0.5, 0.0)):.4f}")
