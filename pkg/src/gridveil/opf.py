"""AC power-flow optimization models in polar voltage coordinates.

Builders translate a network into generic constrained programs for
economic dispatch, plain feasibility checking, and maximum load
restoration after line outages. Flows are expressions of the bus
voltages (and, for the obfuscation models, of per-line admittance
variables), never separate unknowns; all derivatives are exact.

For a branch with series admittance ``g + jb``, charging ``bc``, tap
``a`` and shift ``phi_s``, writing ``k = v_f v_t / a`` and
``phi = theta_f - theta_t - phi_s``, the four directed flows are

    p_f =  g (v_f^2/a^2 - k cos phi) - b k sin phi
    q_f = -g k sin phi - b (v_f^2/a^2 - k cos phi) - (bc/2) v_f^2/a^2
    p_t =  g (v_t^2   - k cos phi) + b k sin phi
    q_t =  g k sin phi - b (v_t^2   - k cos phi) - (bc/2) v_t^2

which are linear in ``(g, b)``; that linearity is what lets the
obfuscation models treat admittances as decision variables with the
same machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .network import Network, series_admittances
from .nlp.ipm import SolverOptions, solve
from .nlp.problem import NlpProblem, NlpResult, SolveStatus

# Symmetric 5x5 entry order over locals (vf, vt, d, g, b); d = theta_f - theta_t.
_PAIRS = [(0, 0), (0, 1), (0, 2), (0, 3), (0, 4),
          (1, 1), (1, 2), (1, 3), (1, 4),
          (2, 2), (2, 3), (2, 4),
          (3, 3), (3, 4),
          (4, 4)]


class Feasibility(Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    ERROR = "error"


@dataclass
class OpfSolution:
    """Dispatch point: per-bus voltage, per-generator output, arc flows."""

    bus_ids: list[int]
    v: np.ndarray
    theta: np.ndarray
    gen_ids: list[int]
    pg: np.ndarray
    qg: np.ndarray
    line_ids: list[int]
    flow_from: np.ndarray  # complex S_ij per line, from side
    flow_to: np.ndarray    # complex S_ji per line, to side
    cost: float
    result: NlpResult

    @property
    def optimal(self) -> bool:
        return self.result.optimal

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "status": self.result.status.value,
            "iterations": self.result.iterations,
            "kkt_residual": self.result.kkt_residual,
            "v": dict(zip(map(str, self.bus_ids), self.v.tolist())),
            "theta": dict(zip(map(str, self.bus_ids), self.theta.tolist())),
            "pg": dict(zip(map(str, self.gen_ids), self.pg.tolist())),
            "qg": dict(zip(map(str, self.gen_ids), self.qg.tolist())),
            "flow_from": {str(i): [s.real, s.imag] for i, s in zip(self.line_ids, self.flow_from)},
            "flow_to": {str(i): [s.real, s.imag] for i, s in zip(self.line_ids, self.flow_to)},
        }


@dataclass
class RestorationSolution:
    """Load restoration outcome; ``served_fraction`` is over active load."""

    served_fraction: float
    load_factor: dict[int, float]
    islands: int
    details: list[OpfSolution] = field(default_factory=list)


class ArcSystem:
    """Precomputed indices and exact derivatives of the branch flows.

    Variable layout owned by the caller; this class only needs the
    column positions of (theta, v) per bus and optionally (g, b) per
    line. All evaluations are vectorized over lines.
    """

    def __init__(self, net: Network):
        self.net = net
        self.bus_ids = [b.id for b in net.buses]
        self.pos = {b: i for i, b in enumerate(self.bus_ids)}
        self.m = len(self.bus_ids)
        self.n = net.n_lines
        self.fi = np.array([self.pos[ln.from_bus] for ln in net.lines], dtype=int)
        self.ti = np.array([self.pos[ln.to_bus] for ln in net.lines], dtype=int)
        self.tap = np.array([ln.tap for ln in net.lines])
        self.shift = np.array([ln.shift for ln in net.lines])
        self.bc = np.array([ln.charging for ln in net.lines])
        g, b = series_admittances(net)
        self.g0 = np.array(g)
        self.b0 = np.array(b)
        self.s_max = np.array([ln.s_max for ln in net.lines])
        self.angle_max = np.array([ln.angle_max for ln in net.lines])
        self.limited = np.flatnonzero(np.isfinite(self.s_max))

    def geometry(self, v: np.ndarray, theta: np.ndarray):
        """Per-line quantities A, B, C, M1, M2 and their derivative stacks."""
        vf, vt = v[self.fi], v[self.ti]
        d = theta[self.fi] - theta[self.ti]
        phi = d - self.shift
        a = self.tap
        cosp, sinp = np.cos(phi), np.sin(phi)
        k = vf * vt / a
        M1 = vf**2 / a**2
        M2 = vt**2
        A = M1 - k * cosp
        B = k * sinp
        C = M2 - k * cosp
        # first derivatives over (vf, vt, d)
        dA = np.stack([2 * vf / a**2 - (vt / a) * cosp, -(vf / a) * cosp, k * sinp], axis=1)
        dB = np.stack([(vt / a) * sinp, (vf / a) * sinp, k * cosp], axis=1)
        dC = np.stack([-(vt / a) * cosp, 2 * vt - (vf / a) * cosp, k * sinp], axis=1)
        dM1 = np.stack([2 * vf / a**2, np.zeros(self.n), np.zeros(self.n)], axis=1)
        dM2 = np.stack([np.zeros(self.n), 2 * vt, np.zeros(self.n)], axis=1)
        # symmetric second derivatives over (vf, vt, d):
        # order (vf,vf) (vf,vt) (vf,d) (vt,vt) (vt,d) (d,d)
        z = np.zeros(self.n)
        HA = np.stack([2 / a**2 + z, -cosp / a, (vt / a) * sinp, z, (vf / a) * sinp, k * cosp], axis=1)
        HB = np.stack([z, sinp / a, (vt / a) * cosp, z, (vf / a) * cosp, -k * sinp], axis=1)
        HC = np.stack([z, -cosp / a, (vt / a) * sinp, 2 + z, (vf / a) * sinp, k * cosp], axis=1)
        HM1 = np.stack([2 / a**2 + z, z, z, z, z, z], axis=1)
        HM2 = np.stack([z, z, z, 2 + z, z, z], axis=1)
        return A, B, C, M1, M2, dA, dB, dC, dM1, dM2, HA, HB, HC, HM1, HM2

    def flows(self, v, theta, g, b):
        A, B, C, M1, M2, *_ = self.geometry(v, theta)
        hb = 0.5 * self.bc
        pf = g * A - b * B
        qf = -g * B - b * A - hb * M1
        pt = g * C + b * B
        qt = g * B - b * C - hb * M2
        return pf, qf, pt, qt

    def flow_derivatives(self, v, theta, g, b):
        """Flows, 5-column gradients, and 15-column symmetric Hessians.

        Columns are over the local variables (vf, vt, d, g, b); the
        Hessian entries follow ``_PAIRS``.
        """
        A, B, C, M1, M2, dA, dB, dC, dM1, dM2, HA, HB, HC, HM1, HM2 = self.geometry(v, theta)
        hb = (0.5 * self.bc)[:, None]
        gc, bcol = g[:, None], b[:, None]
        pf = g * A - b * B
        qf = -g * B - b * A - hb.ravel() * M1
        pt = g * C + b * B
        qt = g * B - b * C - hb.ravel() * M2

        def grad(vv, dg, db):
            return np.concatenate([vv, dg[:, None], db[:, None]], axis=1)

        dpf = grad(gc * dA - bcol * dB, A, -B)
        dqf = grad(-gc * dB - bcol * dA - hb * dM1, -B, -A)
        dpt = grad(gc * dC + bcol * dB, C, B)
        dqt = grad(gc * dB - bcol * dC - hb * dM2, B, -C)

        def hess(vv, dg, db):
            # vv: (n,6) over the (vf,vt,d) block; dg/db: (n,3) cross terms
            out = np.zeros((self.n, 15))
            out[:, [0, 1, 2, 5, 6, 9]] = vv
            out[:, [3, 7, 10]] = dg      # (vf,g) (vt,g) (d,g)
            out[:, [4, 8, 11]] = db      # (vf,b) (vt,b) (d,b)
            return out

        hpf = hess(gc * HA - bcol * HB, dA, -dB)
        hqf = hess(-gc * HB - bcol * HA - hb * HM1, -dB, -dA)
        hpt = hess(gc * HC + bcol * HB, dC, dB)
        hqt = hess(gc * HB - bcol * HC - hb * HM2, dB, -dC)
        return (pf, qf, pt, qt), (dpf, dqf, dpt, dqt), (hpf, hqf, hpt, hqt)


def recompute_flows(net: Network, v_by_bus: dict[int, float], theta_by_bus: dict[int, float],
                    g=None, b=None) -> tuple[np.ndarray, np.ndarray]:
    """Arc flows from complex arithmetic, independent of the builders.

    Used by tests to cross-check solver output: builds the two-port
    admittances and evaluates ``S = V (Y V)*`` directly.
    """
    if g is None or b is None:
        g, b = series_admittances(net)
    sf, st = [], []
    for ln, gi, bi in zip(net.lines, g, b):
        y = complex(gi, bi)
        ysh = 1j * ln.charging / 2.0
        t = ln.tap * complex(math.cos(ln.shift), math.sin(ln.shift))
        yff = (y + ysh) / (ln.tap**2)
        yft = -y / t.conjugate()
        ytf = -y / t
        ytt = y + ysh
        vf = v_by_bus[ln.from_bus] * complex(math.cos(theta_by_bus[ln.from_bus]),
                                             math.sin(theta_by_bus[ln.from_bus]))
        vt = v_by_bus[ln.to_bus] * complex(math.cos(theta_by_bus[ln.to_bus]),
                                           math.sin(theta_by_bus[ln.to_bus]))
        sf.append(vf * (yff * vf + yft * vt).conjugate())
        st.append(vt * (ytf * vf + ytt * vt).conjugate())
    return np.array(sf), np.array(st)


class _ModelSpec:
    """Index bookkeeping for one AC model over a single network."""

    def __init__(self, net: Network, load_scaling: bool = False):
        self.net = net
        self.arcs = ArcSystem(net)
        m, n = self.arcs.m, self.arcs.n
        self.ng = len(net.generators)
        self.gen_pos = np.array([self.arcs.pos[g.bus] for g in net.generators], dtype=int)

        self.i_theta = np.arange(m)
        self.i_v = m + np.arange(m)
        self.i_pg = 2 * m + np.arange(self.ng)
        self.i_qg = 2 * m + self.ng + np.arange(self.ng)
        self.n_base = 2 * m + 2 * self.ng

        self.load_buses = np.array(
            [i for i, bus in enumerate(net.buses) if bus.p_load != 0.0 or bus.q_load != 0.0],
            dtype=int,
        )
        self.nl = len(self.load_buses) if load_scaling else 0
        self.i_l = self.n_base + np.arange(self.nl)
        self.n_vars = self.n_base + self.nl

        lim = self.arcs.limited
        self.r_kcl_p = np.arange(m)
        self.r_kcl_q = m + np.arange(m)
        self.r_angle = 2 * m + np.arange(n)
        self.r_th_f = 2 * m + n + np.arange(len(lim))
        self.r_th_t = 2 * m + n + len(lim) + np.arange(len(lim))
        self.n_cons = 2 * m + n + 2 * len(lim)

        self.pd = np.array([bus.p_load for bus in net.buses])
        self.qd = np.array([bus.q_load for bus in net.buses])
        self.gs = np.array([bus.g_shunt for bus in net.buses])
        self.bs = np.array([bus.b_shunt for bus in net.buses])
        self.slack = next(i for i, bus in enumerate(net.buses) if bus.is_slack)


def _bounds(spec: _ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    net = spec.net
    lo = np.full(spec.n_vars, -np.inf)
    hi = np.full(spec.n_vars, np.inf)
    lo[spec.i_theta[spec.slack]] = hi[spec.i_theta[spec.slack]] = 0.0
    lo[spec.i_v] = [bus.v_min for bus in net.buses]
    hi[spec.i_v] = [bus.v_max for bus in net.buses]
    lo[spec.i_pg] = [g.p_min for g in net.generators]
    hi[spec.i_pg] = [g.p_max for g in net.generators]
    lo[spec.i_qg] = [g.q_min for g in net.generators]
    hi[spec.i_qg] = [g.q_max for g in net.generators]
    if spec.nl:
        lo[spec.i_l] = 0.0
        hi[spec.i_l] = 1.0
    return lo, hi


def _con_bounds(spec: _ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    arcs = spec.arcs
    lo = np.zeros(spec.n_cons)
    hi = np.zeros(spec.n_cons)
    lo[spec.r_angle] = -arcs.angle_max
    hi[spec.r_angle] = arcs.angle_max
    lim = arcs.limited
    lo[spec.r_th_f] = -np.inf
    hi[spec.r_th_f] = arcs.s_max[lim] ** 2
    lo[spec.r_th_t] = -np.inf
    hi[spec.r_th_t] = arcs.s_max[lim] ** 2
    return lo, hi


class AcConstraintEvaluator:
    """Constraint callbacks shared by dispatch/feasibility/restoration.

    Owns fixed admittances; the obfuscation module builds its own
    evaluator with (g, b) as trailing variables.
    """

    def __init__(self, spec: _ModelSpec):
        self.spec = spec
        a = spec.arcs
        lim = a.limited
        # Jacobian template: (row, col) pairs in emission order.
        rows, cols = [], []
        loc_cols = [spec.i_v[a.fi], spec.i_v[a.ti], spec.i_theta[a.fi], spec.i_theta[a.ti]]

        def emit(rs, flow_cols):
            for c in flow_cols:
                rows.append(rs)
                cols.append(c)

        emit(spec.r_kcl_p[a.fi], loc_cols)   # pf into from-bus P balance
        emit(spec.r_kcl_p[a.ti], loc_cols)   # pt into to-bus P balance
        emit(spec.r_kcl_q[a.fi], loc_cols)   # qf
        emit(spec.r_kcl_q[a.ti], loc_cols)   # qt
        # shunts d/dv
        rows.append(spec.r_kcl_p)
        cols.append(spec.i_v)
        rows.append(spec.r_kcl_q)
        cols.append(spec.i_v)
        # generator injections
        rows.append(spec.r_kcl_p[spec.gen_pos])
        cols.append(spec.i_pg)
        rows.append(spec.r_kcl_q[spec.gen_pos])
        cols.append(spec.i_qg)
        # load scaling
        if spec.nl:
            rows.append(spec.r_kcl_p[spec.load_buses])
            cols.append(spec.i_l)
            rows.append(spec.r_kcl_q[spec.load_buses])
            cols.append(spec.i_l)
        # angle difference rows
        rows.append(spec.r_angle)
        cols.append(spec.i_theta[a.fi])
        rows.append(spec.r_angle)
        cols.append(spec.i_theta[a.ti])
        # thermal rows over the same four local columns
        loc_lim = [c[lim] for c in loc_cols]
        emit(spec.r_th_f, loc_lim)
        emit(spec.r_th_t, loc_lim)
        self.jac_rows = np.concatenate(rows)
        self.jac_cols = np.concatenate(cols)

        # Hessian template: per-line symmetric 4x4 over (vf, vt, tf, tt)
        # expanded to full (row, col) pairs, plus the shunt diagonal.
        l4 = np.stack(loc_cols, axis=1)  # (n, 4)
        hr, hc = [], []
        for i in range(4):
            for j in range(4):
                hr.append(l4[:, i])
                hc.append(l4[:, j])
        self._line_hess_rc = (np.concatenate(hr), np.concatenate(hc))
        self._shunt_rc = (spec.i_v, spec.i_v)

    # -- local (vf, vt, d) columns expanded to (vf, vt, tf, tt) ------------
    @staticmethod
    def _expand(d5: np.ndarray) -> np.ndarray:
        # (n,5) over (vf,vt,d,g,b) -> (n,4) over (vf,vt,tf,tt), g/b dropped
        return np.stack([d5[:, 0], d5[:, 1], d5[:, 2], -d5[:, 2]], axis=1)

    @staticmethod
    def _sym15_to_44(h15: np.ndarray) -> np.ndarray:
        """(n,15) packed local Hessian -> (n,4,4) over (vf, vt, tf, tt)."""
        n = h15.shape[0]
        h3 = np.zeros((n, 3, 3))
        idx = {(0, 0): 0, (0, 1): 1, (0, 2): 2, (1, 1): 5, (1, 2): 6, (2, 2): 9}
        for (i, j), k in idx.items():
            h3[:, i, j] = h15[:, k]
            h3[:, j, i] = h15[:, k]
        T = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 1.0, -1.0]])  # (3,4): d -> tf - tt
        return np.einsum("ia,nij,jb->nab", T, h3, T)

    def constraints(self, x: np.ndarray) -> np.ndarray:
        s, a = self.spec, self.spec.arcs
        v, th = x[s.i_v], x[s.i_theta]
        pf, qf, pt, qt = a.flows(v, th, a.g0, a.b0)
        out = np.zeros(s.n_cons)
        np.add.at(out, s.r_kcl_p[a.fi], pf)
        np.add.at(out, s.r_kcl_p[a.ti], pt)
        np.add.at(out, s.r_kcl_q[a.fi], qf)
        np.add.at(out, s.r_kcl_q[a.ti], qt)
        out[s.r_kcl_p] += s.gs * v**2 - np.bincount(
            s.gen_pos, weights=x[s.i_pg], minlength=a.m)
        out[s.r_kcl_q] += -s.bs * v**2 - np.bincount(
            s.gen_pos, weights=x[s.i_qg], minlength=a.m)
        scale_p, scale_q = s.pd.copy(), s.qd.copy()
        if s.nl:
            lfull = np.ones(a.m)
            lfull[s.load_buses] = x[s.i_l]
            scale_p, scale_q = s.pd * lfull, s.qd * lfull
        out[s.r_kcl_p] += scale_p
        out[s.r_kcl_q] += scale_q
        out[s.r_angle] = th[a.fi] - th[a.ti]
        lim = a.limited
        out[s.r_th_f] = pf[lim] ** 2 + qf[lim] ** 2
        out[s.r_th_t] = pt[lim] ** 2 + qt[lim] ** 2
        return out

    def jacobian(self, x: np.ndarray) -> sp.coo_matrix:
        s, a = self.spec, self.spec.arcs
        v, th = x[s.i_v], x[s.i_theta]
        flows, grads, _ = a.flow_derivatives(v, th, a.g0, a.b0)
        pf, qf, pt, qt = flows
        dpf, dqf, dpt, dqt = (self._expand(g) for g in grads)
        lim = a.limited
        # concatenate per local variable, matching the template emission order
        parts = [np.concatenate([d[:, i] for i in range(4)]) for d in (dpf, dpt, dqf, dqt)]
        parts.append(2 * s.gs * v)
        parts.append(-2 * s.bs * v)
        parts.append(-np.ones(s.ng))
        parts.append(-np.ones(s.ng))
        if s.nl:
            parts.append(s.pd[s.load_buses])
            parts.append(s.qd[s.load_buses])
        parts.append(np.ones(a.n))
        parts.append(-np.ones(a.n))
        th_f = 2 * pf[lim, None] * dpf[lim] + 2 * qf[lim, None] * dqf[lim]
        th_t = 2 * pt[lim, None] * dpt[lim] + 2 * qt[lim, None] * dqt[lim]
        parts.append(np.concatenate([th_f[:, i] for i in range(4)]))
        parts.append(np.concatenate([th_t[:, i] for i in range(4)]))
        data = np.concatenate(parts)
        return sp.coo_matrix((data, (self.jac_rows, self.jac_cols)),
                             shape=(s.n_cons, s.n_vars))

    def hessian(self, x: np.ndarray, lam: np.ndarray) -> sp.coo_matrix:
        """Sum of constraint Hessians weighted by multipliers."""
        s, a = self.spec, self.spec.arcs
        v, th = x[s.i_v], x[s.i_theta]
        flows, grads, hesss = a.flow_derivatives(v, th, a.g0, a.b0)
        pf, qf, pt, qt = flows
        g4 = [self._expand(g) for g in grads]
        h44 = [self._sym15_to_44(h) for h in hesss]
        lim = a.limited
        lam_pf = lam[s.r_kcl_p[a.fi]].copy()
        lam_pt = lam[s.r_kcl_p[a.ti]].copy()
        lam_qf = lam[s.r_kcl_q[a.fi]].copy()
        lam_qt = lam[s.r_kcl_q[a.ti]].copy()
        lam_tf = np.zeros(a.n)
        lam_tt = np.zeros(a.n)
        lam_tf[lim] = lam[s.r_th_f]
        lam_tt[lim] = lam[s.r_th_t]
        w = (lam_pf + 2 * lam_tf * pf, lam_qf + 2 * lam_tf * qf,
             lam_pt + 2 * lam_tt * pt, lam_qt + 2 * lam_tt * qt)
        acc = np.zeros((a.n, 4, 4))
        for wi, hi in zip(w, h44):
            acc += wi[:, None, None] * hi
        for wi, gi in zip((lam_tf, lam_tf, lam_tt, lam_tt), g4):
            acc += 2 * wi[:, None, None] * np.einsum("ni,nj->nij", gi, gi)
        data = [np.concatenate([acc[:, i, j] for i in range(4) for j in range(4)])]
        rows = [self._line_hess_rc[0]]
        cols = [self._line_hess_rc[1]]
        # shunt curvature on KCL rows
        shunt = 2 * s.gs * lam[s.r_kcl_p] - 2 * s.bs * lam[s.r_kcl_q]
        rows.append(self._shunt_rc[0])
        cols.append(self._shunt_rc[1])
        data.append(shunt)
        return sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(s.n_vars, s.n_vars))


def _cost_terms(net: Network):
    base = net.base_mva
    c2 = np.array([g.c2 for g in net.generators])
    c1 = np.array([g.c1 for g in net.generators])
    c0 = np.array([g.c0 for g in net.generators])
    return base, c2, c1, c0


def dispatch_cost(net: Network, pg: np.ndarray) -> float:
    """Generation cost in $/h for a per-unit dispatch vector."""
    base, c2, c1, c0 = _cost_terms(net)
    mw = np.asarray(pg) * base
    return float(np.sum(c2 * mw**2 + c1 * mw + c0))


def _flat_start(spec: _ModelSpec) -> np.ndarray:
    net = spec.net
    x0 = np.zeros(spec.n_vars)
    x0[spec.i_v] = 1.0
    x0[spec.i_v] = np.clip(x0[spec.i_v], [b.v_min for b in net.buses],
                           [b.v_max for b in net.buses])
    x0[spec.i_pg] = [(g.p_min + g.p_max) / 2 for g in net.generators]
    x0[spec.i_qg] = [(g.q_min + g.q_max) / 2 for g in net.generators]
    if spec.nl:
        x0[spec.i_l] = 1.0
    return x0


def build_ac_opf(net: Network) -> NlpProblem:
    """Economic dispatch: minimize generation cost subject to AC physics,
    voltage/angle bounds, generator boxes, and thermal limits."""
    spec = _ModelSpec(net)
    ev = AcConstraintEvaluator(spec)
    base, c2, c1, c0 = _cost_terms(net)
    i_pg = spec.i_pg

    def objective(x):
        mw = x[i_pg] * base
        return float(np.sum(c2 * mw**2 + c1 * mw + c0))

    def gradient(x):
        g = np.zeros(spec.n_vars)
        g[i_pg] = (2 * c2 * x[i_pg] * base + c1) * base
        return g

    def hessian(x, ow, lam):
        Hc = ev.hessian(x, lam)
        rows = np.concatenate([Hc.row, i_pg])
        cols = np.concatenate([Hc.col, i_pg])
        data = np.concatenate([Hc.data, ow * 2 * c2 * base**2])
        return sp.coo_matrix((data, (rows, cols)), shape=Hc.shape)

    lo, hi = _bounds(spec)
    clo, chi = _con_bounds(spec)
    problem = NlpProblem(spec.n_vars, lo, hi, spec.n_cons, clo, chi,
                         objective, gradient, ev.constraints, ev.jacobian,
                         hessian, _flat_start(spec))
    problem.spec = spec  # builders expose their index map for reuse
    return problem


def build_feasibility(net: Network) -> NlpProblem:
    """Same constraint system with a constant-zero objective."""
    spec = _ModelSpec(net)
    ev = AcConstraintEvaluator(spec)
    lo, hi = _bounds(spec)
    clo, chi = _con_bounds(spec)
    problem = NlpProblem(spec.n_vars, lo, hi, spec.n_cons, clo, chi,
                         lambda x: 0.0, lambda x: np.zeros(spec.n_vars),
                         ev.constraints, ev.jacobian,
                         lambda x, ow, lam: ev.hessian(x, lam),
                         _flat_start(spec))
    problem.spec = spec
    return problem


def build_restoration(net: Network, damaged: set[int] | None = None) -> NlpProblem:
    """Maximum load restoration on a (connected) damaged network.

    Damaged lines are dropped; per-load-bus factors in [0, 1] scale
    active and reactive demand together and the served active load is
    maximized. The caller is responsible for splitting islands first.
    """
    if damaged:
        kept = [ln for ln in net.lines if ln.id not in damaged]
        net = net.with_lines(kept)
    spec = _ModelSpec(net, load_scaling=True)
    ev = AcConstraintEvaluator(spec)
    pd_w = spec.pd[spec.load_buses]

    def objective(x):
        return -float(np.sum(pd_w * x[spec.i_l])) if spec.nl else 0.0

    def gradient(x):
        g = np.zeros(spec.n_vars)
        if spec.nl:
            g[spec.i_l] = -pd_w
        return g

    lo, hi = _bounds(spec)
    clo, chi = _con_bounds(spec)
    problem = NlpProblem(spec.n_vars, lo, hi, spec.n_cons, clo, chi,
                         objective, gradient, ev.constraints, ev.jacobian,
                         lambda x, ow, lam: ev.hessian(x, lam),
                         _flat_start(spec))
    problem.spec = spec
    return problem


def _solution_from(net: Network, spec: _ModelSpec, res: NlpResult) -> OpfSolution:
    x = res.x
    v, th = x[spec.i_v], x[spec.i_theta]
    a = spec.arcs
    pf, qf, pt, qt = a.flows(v, th, a.g0, a.b0)
    return OpfSolution(
        bus_ids=a.bus_ids, v=v.copy(), theta=th.copy(),
        gen_ids=[g.id for g in net.generators],
        pg=x[spec.i_pg].copy(), qg=x[spec.i_qg].copy(),
        line_ids=[ln.id for ln in net.lines],
        flow_from=pf + 1j * qf, flow_to=pt + 1j * qt,
        cost=dispatch_cost(net, x[spec.i_pg]), result=res)


def solve_ac_opf(net: Network, options: SolverOptions | None = None) -> OpfSolution:
    problem = build_ac_opf(net)
    res = solve(problem, options)
    return _solution_from(net, problem.spec, res)


def check_ac_feasibility(net: Network, options: SolverOptions | None = None) -> Feasibility:
    """Whether the AC operating constraints admit any point.

    Numeric failures are reported as their own outcome, never folded
    into infeasible.
    """
    problem = build_feasibility(net)
    res = solve(problem, options)
    if res.status is SolveStatus.OPTIMAL:
        return Feasibility.FEASIBLE
    if res.status is SolveStatus.INFEASIBLE:
        return Feasibility.INFEASIBLE
    return Feasibility.ERROR


def connected_components(net: Network, damaged: set[int]) -> list[set[int]]:
    """Bus-id components of the network after removing damaged lines."""
    adj: dict[int, list[int]] = {b.id: [] for b in net.buses}
    for ln in net.lines:
        if ln.id in damaged:
            continue
        adj[ln.from_bus].append(ln.to_bus)
        adj[ln.to_bus].append(ln.from_bus)
    seen: set[int] = set()
    comps = []
    for start in adj:
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    comp.add(w)
                    stack.append(w)
        comps.append(comp)
    return comps


def _island_network(net: Network, buses: set[int], damaged: set[int]) -> Network | None:
    """Sub-network on the given buses, re-anchoring the slack at the bus
    of the island's largest generator (ties to the lowest bus id)."""
    gens = [g for g in net.generators if g.bus in buses]
    if not gens:
        return None
    anchor = min(gens, key=lambda g: (-g.p_max, g.bus)).bus
    bs = tuple(replace(b, is_slack=(b.id == anchor)) for b in net.buses if b.id in buses)
    ls = tuple(ln for ln in net.lines
               if ln.id not in damaged and ln.from_bus in buses and ln.to_bus in buses)
    return Network(net.base_mva, bs, ls, tuple(gens), net.name)


def solve_restoration(net: Network, damaged: set[int],
                      options: SolverOptions | None = None) -> RestorationSolution:
    """Maximum load restoration, solving islands independently.

    Islands without generation, and islands whose restoration program is
    infeasible even with all load shed, contribute zero served load.
    """
    total = sum(b.p_load for b in net.buses)
    if total <= 0:
        return RestorationSolution(1.0, {}, 1, [])
    comps = connected_components(net, damaged)
    served = 0.0
    factors: dict[int, float] = {b.id: 0.0 for b in net.buses if b.p_load != 0 or b.q_load != 0}
    details = []
    for comp in comps:
        sub = _island_network(net, comp, damaged)
        if sub is None:
            continue
        problem = build_restoration(sub)
        res = solve(problem, options)
        if res.status is SolveStatus.NUMERIC_FAILURE:
            raise RuntimeError(f"restoration failed numerically on island {sorted(comp)[:5]}")
        if not res.optimal:
            continue  # island cannot operate; its load stays shed
        spec = problem.spec
        details.append(_solution_from(sub, spec, res))
        for pos, lv in zip(spec.load_buses, res.x[spec.i_l]):
            bus = sub.buses[pos]
            factors[bus.id] = float(np.clip(lv, 0.0, 1.0))
            served += factors[bus.id] * bus.p_load
    return RestorationSolution(served / total, factors, len(comps), details)
