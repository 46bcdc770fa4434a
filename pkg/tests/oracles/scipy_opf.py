"""Independent AC-OPF oracle built on scipy's trust-region solver.

Deliberately separate from the package implementation: rectangular
voltage coordinates, a bus admittance matrix instead of per-arc flow
expressions, and scipy finite differences for the constraint Jacobian.
Used to derive the frozen reference objectives in the fixtures and to
cross-check feasibility claims.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import Bounds, NonlinearConstraint, minimize

from gridveil.network import Network, series_admittances


def _ybus(net: Network):
    ids = [b.id for b in net.buses]
    pos = {b: i for i, b in enumerate(ids)}
    m = len(ids)
    Y = np.zeros((m, m), dtype=complex)
    g, b = series_admittances(net)
    for ln, gi, bi in zip(net.lines, g, b):
        y = complex(gi, bi)
        ysh = 1j * ln.charging / 2
        t = ln.tap * complex(math.cos(ln.shift), math.sin(ln.shift))
        f, to = pos[ln.from_bus], pos[ln.to_bus]
        Y[f, f] += (y + ysh) / (ln.tap ** 2)
        Y[to, to] += y + ysh
        Y[f, to] += -y / t.conjugate()
        Y[to, f] += -y / t
    for bus in net.buses:
        Y[pos[bus.id], pos[bus.id]] += complex(bus.g_shunt, bus.b_shunt)
    return Y, pos


def solve_reference_opf(net: Network, maxiter: int = 3000):
    """Returns (objective, status_flag, result) or raises on setup issues."""
    Y, pos = _ybus(net)
    m = len(net.buses)
    ng = len(net.generators)
    G, B = Y.real, Y.imag
    gen_pos = np.array([pos[g.bus] for g in net.generators])
    pd = np.array([b.p_load for b in net.buses])
    qd = np.array([b.q_load for b in net.buses])
    vmin = np.array([b.v_min for b in net.buses])
    vmax = np.array([b.v_max for b in net.buses])
    slack = next(i for i, b in enumerate(net.buses) if b.is_slack)
    base = net.base_mva
    c2 = np.array([g.c2 for g in net.generators])
    c1 = np.array([g.c1 for g in net.generators])
    c0 = np.array([g.c0 for g in net.generators])

    ie = np.arange(m)
    if_ = m + np.arange(m)
    ip = 2 * m + np.arange(ng)
    iq = 2 * m + ng + np.arange(ng)
    nvar = 2 * m + 2 * ng

    def inj(x):
        e, f = x[ie], x[if_]
        ge_bf = G @ e - B @ f
        gf_be = G @ f + B @ e
        p = e * ge_bf + f * gf_be
        q = f * ge_bf - e * gf_be
        return p, q

    def balance(x):
        p, q = inj(x)
        pg = np.zeros(m)
        qg = np.zeros(m)
        np.add.at(pg, gen_pos, x[ip])
        np.add.at(qg, gen_pos, x[iq])
        return np.concatenate([p - (pg - pd), q - (qg - qd)])

    def vmag2(x):
        return x[ie] ** 2 + x[if_] ** 2

    arcs = []
    gvec, bvec = series_admittances(net)
    for ln, gi, bi in zip(net.lines, gvec, bvec):
        if not np.isfinite(ln.s_max):
            continue
        y = complex(gi, bi)
        ysh = 1j * ln.charging / 2
        t = ln.tap * complex(math.cos(ln.shift), math.sin(ln.shift))
        arcs.append((pos[ln.from_bus], pos[ln.to_bus], (y + ysh) / ln.tap ** 2,
                     -y / t.conjugate(), ln.s_max))
        arcs.append((pos[ln.to_bus], pos[ln.from_bus], y + ysh, -y / t, ln.s_max))

    def thermal(x):
        e, f = x[ie], x[if_]
        v = e + 1j * f
        out = np.empty(len(arcs))
        for k, (i, j, yii, yij, _) in enumerate(arcs):
            s = v[i] * np.conj(yii * v[i] + yij * v[j])
            out[k] = abs(s) ** 2
        return out

    angs = [(pos[ln.from_bus], pos[ln.to_bus], ln.angle_max) for ln in net.lines]

    def angles(x):
        e, f = x[ie], x[if_]
        v = e + 1j * f
        return np.array([np.angle(v[i] * np.conj(v[j])) for i, j, _ in angs])

    def cost(x):
        mw = x[ip] * base
        return float(np.sum(c2 * mw ** 2 + c1 * mw + c0))

    def cost_grad(x):
        g = np.zeros(nvar)
        g[ip] = (2 * c2 * x[ip] * base + c1) * base
        return g

    lo = np.full(nvar, -np.inf)
    hi = np.full(nvar, np.inf)
    lo[ie], hi[ie] = -vmax, vmax
    lo[if_], hi[if_] = -vmax, vmax
    lo[if_[slack]] = hi[if_[slack]] = 0.0
    lo[ie[slack]] = 0.0
    lo[ip] = [g.p_min for g in net.generators]
    hi[ip] = [g.p_max for g in net.generators]
    lo[iq] = [g.q_min for g in net.generators]
    hi[iq] = [g.q_max for g in net.generators]

    x0 = np.zeros(nvar)
    x0[ie] = 1.0
    x0[ip] = 0.5 * (lo[ip] + hi[ip])
    x0[iq] = 0.5 * (lo[iq] + hi[iq])

    cons = [
        NonlinearConstraint(balance, 0.0, 0.0, jac="2-point"),
        NonlinearConstraint(vmag2, vmin ** 2, vmax ** 2, jac="2-point"),
        NonlinearConstraint(angles, [-a for *_, a in angs], [a for *_, a in angs],
                            jac="2-point"),
    ]
    if arcs:
        cons.append(NonlinearConstraint(thermal, -np.inf,
                                        [s ** 2 for *_, s in arcs], jac="2-point"))

    res = minimize(cost, x0, jac=cost_grad, bounds=Bounds(lo, hi),
                   constraints=cons, method="trust-constr",
                   options={"maxiter": maxiter, "gtol": 1e-8, "xtol": 1e-10,
                            "verbose": 0})
    viol = float(np.max(np.abs(balance(res.x))))
    return res.fun, res.status, viol, res
