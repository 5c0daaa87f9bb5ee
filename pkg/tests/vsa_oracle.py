"""Exhaustive, loop-based evaluation of the VSA cost over a given grid.

Independent of the vectorised estimator: each grid point and radar pair is
handled separately with the scalar least-squares synthesis from
:mod:`vsaradar.geometry`.
"""

import itertools
import math

import numpy as np

from vsaradar.geometry import IllConditionedGeometryError, los_unit, synthesize_velocity_lstsq


def brute_force_argmin(grid, meas_prev, meas_now, radars, params):
    """Grid index of the cost minimum, or None when no point survives."""
    rp = [r.pos for r in radars]
    r_now = [m.range for m in meas_now]
    best, best_cost = None, math.inf
    for k in np.flatnonzero(grid.inside):
        p = grid.points[k]
        survive, n_valid, wsum, vsum = True, 0, 0.0, np.zeros(2)
        for i, j in itertools.combinations(range(len(radars)), 2):
            try:
                v0 = synthesize_velocity_lstsq(p, [rp[i], rp[j]], [meas_prev[i].radial_velocity,
                                                                    meas_prev[j].radial_velocity])
            except IllConditionedGeometryError:
                continue
            vt = synthesize_velocity_lstsq(p, [rp[i], rp[j]], [meas_now[i].radial_velocity,
                                                               meas_now[j].radial_velocity])
            n0, nt = math.hypot(*v0), math.hypot(*vt)
            dd = abs(n0 - nt)
            if n0 < 1e-6 or nt < 1e-6:
                dth = 0.0
            else:
                dth = math.acos(max(-1.0, min(1.0, float(np.dot(v0, vt)) / (n0 * nt))))
            if dd > params.eps_d or dth > params.eps_theta:
                survive = False
                break
            w = 1.0 / (dd + params.score_ratio * dth + 1e-6)
            wsum += w
            vsum += w * vt
            n_valid += 1
        if not survive or n_valid == 0:
            continue
        v = vsum / wsum
        cost = 0.0
        vres = 0.0
        for r, rm, m in zip(rp, r_now, meas_now):
            cost += (math.hypot(*(p - r)) - rm) ** 2
            vres += (float(np.dot(v, los_unit(p, r))) - m.radial_velocity) ** 2
        cost += params.residual_velocity_weight * vres
        if cost < best_cost:
            best, best_cost = int(k), cost
    return best
