#!/usr/bin/env python3
"""Fit a Lorentz oscillator set to an n,k table and write the JSON parameter file.

    eps(w) = eps_inf + sum_j wp_j^2 / (w0_j^2 - w^2 - i g_j w)

Usage: fit_oscillators.py data/sio2_nk.txt data/sio2_oscillators.json [--count 2]
       [--window-um 5 30]
"""
import argparse
import json

import numpy as np
from scipy.optimize import least_squares

C0 = 299792458.0


def load_table(path):
    rows = [l.split() for l in open(path, encoding="utf-8") if l.strip() and not l.startswith("#")]
    a = np.array(rows, dtype=float)
    return a[:, 0], a[:, 1], a[:, 2]


def model(params, w):
    eps_inf = params[0]
    eps = np.full(w.shape, eps_inf, dtype=complex)
    for j in range(1, len(params), 3):
        wp, w0, g = params[j:j + 3] * 1e14
        eps += wp ** 2 / (w0 ** 2 - w ** 2 - 1j * g * w)
    return eps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("table")
    ap.add_argument("out")
    ap.add_argument("--count", type=int, default=2)
    ap.add_argument("--window-um", type=float, nargs=2, default=(5.0, 30.0))
    args = ap.parse_args()

    lam, n, k = load_table(args.table)
    sel = (lam >= args.window_um[0]) & (lam <= args.window_um[1])
    w = 2 * np.pi * C0 / (lam[sel] * 1e-6)
    eps_data = (n[sel] + 1j * k[sel]) ** 2

    # starting guesses near the two dominant absorption bands (~9.3 um, ~21 um) plus the ~12.5 um band
    seeds = [(1.6, 2.02, 0.12), (1.4, 0.87, 0.10), (0.4, 1.51, 0.10)]
    x0 = [2.0]
    for s in seeds[:args.count]:
        x0.extend(s)
    x0 = np.array(x0)

    def resid(p):
        r = (model(p, w) - eps_data) / np.maximum(np.abs(eps_data), 1.0)
        return np.concatenate([r.real, r.imag])

    fit = least_squares(resid, x0, bounds=(1e-6, np.inf))
    p = fit.x
    eps_fit = model(p, w)
    rel = np.abs(eps_fit - eps_data) / np.maximum(np.abs(eps_data), 1.0)

    osc = []
    for j in range(1, len(p), 3):
        wp, w0, g = p[j:j + 3] * 1e14
        osc.append({"plasma_rad_s": wp, "resonance_rad_s": w0, "damping_rad_s": g})
    doc = {
        "format_version": 1,
        "material": "SiO2",
        "model": "lorentz-oscillators",
        "eps_inf": p[0],
        "oscillators": osc,
        "fit": {
            "source_table": args.table,
            "window_um": list(args.window_um),
            "samples": int(sel.sum()),
            "max_relative_residual": float(rel.max()),
            "rms_relative_residual": float(np.sqrt(np.mean(rel ** 2))),
        },
    }
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
    print(json.dumps(doc["fit"], indent=2))


if __name__ == "__main__":
    main()
