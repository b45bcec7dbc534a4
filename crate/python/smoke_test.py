#!/usr/bin/env python3
"""Smoke test for the segkin_py extension module.

Build and run:

    cargo build --release -p segkin-py
    cp target/release/libsegkin_py.so segkin_py.so   # macOS: .dylib -> .so
    python3 python/smoke_test.py
"""

import math
import sys
import os

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.getcwd())

import segkin_py


def approx(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    # potential: normalization, compact support, transform
    pot = segkin_py.Potential("bump", 6)
    approx(pot.eval(0.0), 35.0 / 32.0, 1e-12)
    assert pot.eval(1.0) == 0.0
    approx(pot.uhat(0.0), 1.0, 1e-12)
    assert pot.uhat(3.7) == pot.uhat(-3.7)
    print(f"potential {pot.describe()}: U(0) = {pot.eval(0.0):.6f}, Uhat(1) = {pot.uhat(1.0):.6f}")

    # phase diagram
    sub = segkin_py.pure_phases(0.5)
    assert sub["m"] == 0.0 and sub["regime"] == "subcritical"
    sup = segkin_py.pure_phases(2.0)
    approx(sup["m"], 0.957504, 1e-5)
    approx(sup["rho_plus"] + sup["rho_minus"], 2.0, 1e-12)
    approx(segkin_py.local_free_energy(2.0, 1.0, 1.0), 2.0, 1e-14)
    print(f"beta=2 phases: m = {sup['m']:.6f}, C = {sup['chemical_potential']:.6f}")

    # dispersion: band and growth rate
    band = segkin_py.unstable_band(2.0)
    assert band and band[0][0] == 0.0
    assert segkin_py.unstable_band(0.9) == []
    lam = segkin_py.growth_rate(2.0, 0.3)
    assert lam is not None and lam > 0.0
    approx(segkin_py.penrose_f(2.0, 0.3, lam), 1.0, 1e-9)
    assert segkin_py.growth_rate(0.5, 0.3) is None
    print(f"band(beta=2) = {band}, lambda(k=0.3) = {lam:.6f}")

    # collisional eigenproblem: alpha = 0 matches the Penrose root,
    # collisions damp but never kill the growth
    eig0 = segkin_py.rightmost_eigenvalue(2.0, 0.3, alpha=0.0)
    approx(eig0["lambda_re"], lam, 1e-6)
    eig1 = segkin_py.rightmost_eigenvalue(2.0, 0.3, alpha=1.0)
    assert 0.0 < eig1["lambda_re"] < eig0["lambda_re"]
    print(f"lambda(alpha=0) = {eig0['lambda_re']:.6f}, lambda(alpha=1) = {eig1['lambda_re']:.6f}")

    # front minimizer
    front = segkin_py.solve_front(2.0, l=8.0, nx=256)
    assert front["residual"] <= 1e-10
    rho1 = front["rho1"]
    assert all(b >= a - 1e-12 for a, b in zip(rho1, rho1[1:])), "rho1 monotone"
    assert front["spectral_gap"] > 0.0
    assert front["tail_decay_rate"] > 0.0
    print(
        f"front: residual = {front['residual']:.2e}, gap = {front['spectral_gap']:.4f}, "
        f"excess = {front['excess_free_energy']:.4f}"
    )

    # characteristics: energy conservation along the front field
    tr = segkin_py.characteristics(2.0, -1.0, 0.8, s_span=10.0)
    e = tr["energy"]
    drift = max(abs(v - e[0]) for v in e)
    assert drift < 1e-9, f"energy drift {drift}"
    print(f"characteristics: energy drift {drift:.2e} over s-span 10")

    print("smoke test OK")


if __name__ == "__main__":
    main()
