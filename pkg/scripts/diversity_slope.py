#!/usr/bin/env python3
"""Measure outage diversity orders from the analytical curves.

Sweeps transmit power, keeps the points inside a target outage window, and
fits the log-log slope; compare against the prediction 2 min(t1, t2) N.
"""

import argparse
import math

import numpy as np

from irislab import analysis as an
from irislab.geometry import NetworkConfig
from irislab.montecarlo import empirical_diversity_slope


def slope_for(n: int, t1: float, t2: float, window=(1e-10, 1e-5)) -> float:
    curve = []
    for pb_dbm in np.arange(-10.0, 80.0, 1.0):
        cfg = NetworkConfig(M=1, K=1, N=n, t1=t1, t2=t2,
                            p_b=1e-3 * 10 ** (pb_dbm / 10.0))
        ctx = an.ClosedFormContext.from_config(cfg)
        op = an.op_closed_form(ctx, cfg.R, cfg.r0, cfg.alpha, clamp=False)
        if window[0] <= op <= window[1]:
            curve.append((10.0 * math.log10(cfg.p_b / cfg.sigma2), op))
    return empirical_diversity_slope(curve)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--t1", type=float, default=2.0)
    parser.add_argument("--t2", type=float, default=1.0)
    parser.add_argument("--elements", default="1,2,3,4")
    args = parser.parse_args()
    for n in (int(s) for s in args.elements.split(",")):
        predicted = an.diversity_order(args.t1, args.t2, n)
        fitted = slope_for(n, args.t1, args.t2)
        print(f"N={n}: fitted slope {fitted:6.3f}, predicted {predicted:4.1f}")


if __name__ == "__main__":
    main()
