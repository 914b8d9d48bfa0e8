#!/usr/bin/env python3
"""Regenerate the frozen explicit-RK2 reference for the mixing comparison.

The acceptance criterion compares the second-order penalized scheme at the
transport-CFL step against explicit RK2 at one tenth of that step on the same
grid (n_x = 200, n_v = 32, eps0 = 1e-3, t = 0.75).  The reference costs about
an hour of CPU, so its endpoint moments are frozen here; rerun this script to
refresh them:

    python tests/data/make_c8_reference.py
"""

from pathlib import Path

import numpy as np

from kap.ap_solver import KineticProblem, KnudsenField, run_kinetic
from kap.collision import PenaltyConfig, precompute_kernel_modes
from kap.experiments import mixing_initial
from kap.grid import BC_PERIODIC, SpatialMesh, VelocityGrid


def main():
    vg = VelocityGrid(32, 7.0)
    km = precompute_kernel_modes(vg)
    mesh = SpatialMesh(200, -0.5, 0.5, bc=BC_PERIODIC)
    f0 = mixing_initial(mesh, vg)
    pb = KineticProblem(mesh, vg, KnudsenField.mixing(mesh, 1e-3), PenaltyConfig(), km)
    res = run_kinetic(pb, f0, scheme="explicit_rk2", t_end=0.75, output_interval=0.25, dt_factor=0.1)
    U = res.macro[-1]
    out = Path(__file__).parent / "c8_rk2_reference.npz"
    np.savez_compressed(
        out,
        rho=U.rho,
        ux=U.velocity[:, 0],
        uy=U.velocity[:, 1],
        T=U.temperature,
        t=0.75,
        n_x=200,
        n_v=32,
        eps0=1e-3,
        dt=res.dt,
        n_steps=res.n_steps,
    )
    print(f"wrote {out} (dt = {res.dt:.3e}, {res.n_steps} steps)")


if __name__ == "__main__":
    main()
