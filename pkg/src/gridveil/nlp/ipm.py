"""Primal-dual interior-point solver with a filter line search.

Inequality constraints get slack variables, bounds get logarithmic
barriers, and each barrier subproblem is solved by Newton steps on the
primal-dual system. The search direction comes from a sparse symmetric
indefinite factorization whose inertia is corrected by diagonal
regularization; step acceptance uses a (violation, barrier-objective)
filter with second-order corrections; a Gauss-Newton feasibility
restoration phase doubles as the infeasibility detector: when it stalls
with the violation above tolerance, the problem is declared infeasible.

Everything is deterministic: identical problems, options, and starting
points reproduce the iterate sequence bitwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .ldl import LdlSolver
from .problem import NlpProblem, NlpResult, SolveStatus

log = logging.getLogger("gridveil.nlp")

_INF = 1e19  # bounds at or beyond this magnitude are treated as absent


@dataclass
class SolverOptions:
    feas_tol: float = 1e-6
    opt_tol: float = 1e-6
    max_iter: int = 500
    mu0: float = 0.1
    max_cpu_factorizations: int = 40  # per-iteration inertia-correction cap
    verbose: bool = False


class _CallbackBox:
    """Scaled, cached views of the user callbacks."""

    def __init__(self, p: NlpProblem, free: np.ndarray, x_full: np.ndarray,
                 sf: float, sc: np.ndarray):
        self.p = p
        self.free = free
        self.x_full = x_full.copy()
        self.sf = sf
        self.sc = sc
        self._x_key: np.ndarray | None = None

    def full_point(self, xf: np.ndarray) -> np.ndarray:
        x = self.x_full.copy()
        x[self.free] = xf
        return x

    def _refresh(self, xf: np.ndarray) -> None:
        if self._x_key is not None and np.array_equal(self._x_key, xf):
            return
        x = self.full_point(xf)
        self._x_key = xf.copy()
        self.f = self.sf * float(self.p.objective(x))
        g = np.asarray(self.p.gradient(x), dtype=float)
        if g.shape != (self.p.n_vars,):
            raise ValueError("callback dimension mismatch: gradient")
        self.g = self.sf * g[self.free]
        if self.p.n_cons:
            c = np.asarray(self.p.constraints(x), dtype=float)
            if c.shape != (self.p.n_cons,):
                raise ValueError("callback dimension mismatch: constraints")
            self.c = self.sc * c
            J = sp.csc_matrix(self.p.jacobian(x))
            if J.shape != (self.p.n_cons, self.p.n_vars):
                raise ValueError("callback dimension mismatch: jacobian")
            self.J = sp.diags(self.sc) @ J[:, self.free]
        else:
            self.c = np.zeros(0)
            self.J = sp.csc_matrix((0, len(self.free)))

    def eval_f(self, xf):
        self._refresh(xf)
        return self.f

    def eval_g(self, xf):
        self._refresh(xf)
        return self.g

    def eval_c(self, xf):
        self._refresh(xf)
        return self.c

    def eval_J(self, xf):
        self._refresh(xf)
        return self.J

    def eval_H(self, xf: np.ndarray, lam_scaled: np.ndarray) -> sp.csc_matrix:
        x = self.full_point(xf)
        mult = self.sc * lam_scaled if self.p.n_cons else np.zeros(0)
        H = sp.csc_matrix(self.p.hessian(x, self.sf, mult))
        if H.shape != (self.p.n_vars, self.p.n_vars):
            raise ValueError("callback dimension mismatch: hessian")
        return H[:, self.free][self.free, :]


def _interior_start(v: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Project a point strictly inside its bounds (kappa rule)."""
    k1, k2 = 1e-2, 1e-2
    out = v.copy()
    has_l, has_u = np.isfinite(lo), np.isfinite(hi)
    both = has_l & has_u
    lo_s = np.where(has_l, lo, 0.0)
    hi_s = np.where(has_u, hi, 0.0)
    width = np.where(both, hi_s - lo_s, np.inf)
    pl = np.minimum(k1 * np.maximum(1.0, np.abs(lo_s)), k2 * width)
    pu = np.minimum(k1 * np.maximum(1.0, np.abs(hi_s)), k2 * width)
    lo_t = np.where(has_l, lo_s + pl, -np.inf)
    hi_t = np.where(has_u, hi_s - pu, np.inf)
    mid = both & (lo_t > hi_t)
    out = np.minimum(np.maximum(out, lo_t), hi_t)
    out[mid] = 0.5 * (lo_s[mid] + hi_s[mid])
    return out


def solve(problem: NlpProblem, options: SolverOptions | None = None) -> NlpResult:
    """Minimize the problem to local optimality.

    Returns a result whose status is one of optimal, infeasible,
    iteration_limit, or numeric_failure; on optimal the unscaled
    constraint violation is within ``feas_tol`` and the scaled KKT
    residual within ``opt_tol``.
    """
    opts = options or SolverOptions()
    try:
        return _solve_inner(problem, opts)
    except (FloatingPointError, _NumericFailure) as exc:
        return NlpResult(SolveStatus.NUMERIC_FAILURE, problem.x0.copy(), np.nan,
                         np.inf, 0, np.inf, message=str(exc))


class _NumericFailure(Exception):
    pass


def _finite_or_fail(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise _NumericFailure("non-finite value from callback")


def _solve_inner(problem: NlpProblem, opts: SolverOptions) -> NlpResult:
    p = problem
    if np.any(p.var_lo > p.var_hi) or (p.n_cons and np.any(p.con_lo > p.con_hi)):
        return NlpResult(SolveStatus.INFEASIBLE, p.x0.copy(), np.nan, np.inf, 0,
                         np.inf, message="empty bound box")

    both_finite = np.isfinite(p.var_lo) & np.isfinite(p.var_hi)
    fixed = both_finite & ((p.var_hi - p.var_lo) <= 1e-12 * (1.0 + np.abs(np.where(both_finite, p.var_hi, 0.0))))
    free = np.flatnonzero(~fixed)
    x_full = p.x0.astype(float).copy()
    x_full[fixed] = 0.5 * (p.var_lo[fixed] + p.var_hi[fixed])
    nf = len(free)

    eq = np.zeros(p.n_cons, dtype=bool)
    if p.n_cons:
        cf = np.isfinite(p.con_lo) & np.isfinite(p.con_hi)
        eq = cf & ((p.con_hi - p.con_lo) <= 1e-12 * (1.0 + np.abs(np.where(cf, p.con_hi, 0.0))))
    eq_rows = np.flatnonzero(eq)
    in_rows = np.flatnonzero(~eq)
    ns = len(in_rows)
    m = p.n_cons

    # Gradient-based scaling: cap the largest objective/constraint gradient
    # entry at 100 so tolerances mean the same thing across models.
    x_start = x_full.copy()
    g0 = np.asarray(p.gradient(x_start), dtype=float)
    _finite_or_fail(g0)
    sf = min(1.0, 100.0 / max(1e-8, float(np.abs(g0).max()))) if g0.size else 1.0
    sc = np.ones(m)
    if m:
        J0 = sp.csr_matrix(p.jacobian(x_start))
        _finite_or_fail(J0.data)
        row_max = np.zeros(m)
        absJ = abs(J0)
        row_max = np.asarray(absJ.max(axis=1).todense()).ravel() if J0.nnz else row_max
        sc = np.minimum(1.0, 100.0 / np.maximum(1e-8, row_max))

    box = _CallbackBox(p, free, x_full, sf, sc)

    # Internal variables y = [x_free; slacks], with relaxed finite bounds.
    yl = np.concatenate([p.var_lo[free], p.con_lo[in_rows] * sc[in_rows]])
    yu = np.concatenate([p.var_hi[free], p.con_hi[in_rows] * sc[in_rows]])
    yl = np.where(yl <= -_INF, -np.inf, yl)
    yu = np.where(yu >= _INF, np.inf, yu)
    relax = 1e-8
    yl_r = np.where(np.isfinite(yl), yl - relax * np.maximum(1.0, np.abs(yl)), yl)
    yu_r = np.where(np.isfinite(yu), yu + relax * np.maximum(1.0, np.abs(yu)), yu)
    has_l, has_u = np.isfinite(yl_r), np.isfinite(yu_r)
    ny = nf + ns
    be = p.con_lo[eq_rows] * sc[eq_rows]

    xf = _interior_start(x_full[free], yl_r[:nf], yu_r[:nf])
    c0 = box.eval_c(xf)
    _finite_or_fail(c0, box.eval_g(xf))
    s = _interior_start(c0[in_rows], yl_r[nf:], yu_r[nf:])
    y = np.concatenate([xf, s])

    lam = np.zeros(m)
    zl = np.where(has_l, 1.0, 0.0)
    zu = np.where(has_u, 1.0, 0.0)

    mu = opts.mu0
    tau = max(0.99, 1.0 - mu)

    def residual_e(yv: np.ndarray) -> np.ndarray:
        c = box.eval_c(yv[:nf])
        out = np.empty(m)
        out[eq_rows] = c[eq_rows] - be
        out[in_rows] = c[in_rows] - yv[nf:]
        return out

    def theta(yv: np.ndarray) -> float:
        return float(np.abs(residual_e(yv)).sum()) if m else 0.0

    def barrier_phi(yv: np.ndarray, mu_v: float) -> float:
        val = box.eval_f(yv[:nf])
        dl = yv[has_l] - yl_r[has_l]
        du = yu_r[has_u] - yv[has_u]
        if np.any(dl <= 0) or np.any(du <= 0):
            return np.inf
        return val - mu_v * (np.log(dl).sum() + np.log(du).sum())

    def barrier_grad(yv: np.ndarray, mu_v: float) -> np.ndarray:
        g = np.concatenate([box.eval_g(yv[:nf]), np.zeros(ns)])
        with np.errstate(divide="ignore"):
            g = g - np.where(has_l, mu_v / (yv - yl_r), 0.0)
            g = g + np.where(has_u, mu_v / (yu_r - yv), 0.0)
        return g

    def jac_y(yv: np.ndarray) -> sp.csc_matrix:
        J = box.eval_J(yv[:nf])
        if ns:
            Pmat = sp.coo_matrix((-np.ones(ns), (in_rows, np.arange(ns))), shape=(m, ns))
            return sp.hstack([J, Pmat], format="csc")
        return J.tocsc()

    def kkt_errors(yv, lam_v, zl_v, zu_v, mu_v):
        grad = np.concatenate([box.eval_g(yv[:nf]), np.zeros(ns)])
        if m:
            grad = grad + jac_y(yv).T @ lam_v
        grad = grad - zl_v + zu_v
        n_bnd = max(1, int(has_l.sum() + has_u.sum()))
        sd = max(100.0, (np.abs(lam_v).sum() + zl_v.sum() + zu_v.sum()) / (m + n_bnd)) / 100.0
        sc_ = max(100.0, (zl_v.sum() + zu_v.sum()) / n_bnd) / 100.0
        e_dual = float(np.abs(grad).max(initial=0.0)) / sd
        e_pri = float(np.abs(residual_e(yv)).max(initial=0.0)) if m else 0.0
        comp_l = np.abs((yv - yl_r)[has_l] * zl_v[has_l] - mu_v)
        comp_u = np.abs((yu_r - yv)[has_u] * zu_v[has_u] - mu_v)
        e_comp = float(max(comp_l.max(initial=0.0), comp_u.max(initial=0.0))) / sc_
        return max(e_dual, e_pri, e_comp), e_pri

    # KKT matrix template: Hessian block, slack diagonal (explicit zeros so
    # the pattern also fits the restoration system), Jacobian, and the
    # regularization diagonals.
    solver_cache: dict[str, LdlSolver] = {}

    def assemble_kkt(W: sp.spmatrix, Jm: sp.spmatrix, sigma: np.ndarray,
                     dw: float, dc_diag: np.ndarray) -> sp.csc_matrix:
        diag_y = sp.diags(sigma + dw)
        Wfull = sp.bmat([[W, None], [None, sp.csc_matrix((ns, ns))]], format="coo") if ns \
            else sp.coo_matrix(W)
        return sp.bmat(
            [[Wfull + diag_y, Jm.T], [Jm, sp.diags(-dc_diag)]],
            format="csc",
        )

    def factor(K: sp.csc_matrix):
        if "ldl" not in solver_cache:
            solver_cache["ldl"] = LdlSolver(K)
        try:
            inertia = solver_cache["ldl"].refactor(K)
        except ValueError:
            # pattern drifted (regularization toggled); re-analyze once
            solver_cache["ldl"] = LdlSolver(K)
            inertia = solver_cache["ldl"].refactor(K)
        return solver_cache["ldl"], inertia

    def solve_kkt(K, rhs):
        sol = solver_cache["ldl"].solve(rhs)
        # one round of iterative refinement; LDL without pivoting benefits
        r = rhs - K @ sol
        if np.abs(r).max(initial=0.0) > 1e-10 * max(1.0, np.abs(rhs).max(initial=0.0)):
            sol = sol + solver_cache["ldl"].solve(r)
        return sol

    theta_0 = max(1.0, theta(y))
    theta_min = 1e-4 * theta_0
    theta_max = 1e4 * theta_0
    filt: list[tuple[float, float]] = [(theta_max, -np.inf)]

    gamma_theta, gamma_phi = 1e-5, 1e-5
    s_theta, s_phi, delta_sw = 1.1, 2.3, 1.0
    eta_phi = 1e-4
    kappa_sigma = 1e10
    kappa_eps, kappa_mu, theta_mu = 10.0, 0.2, 1.5
    dw_last = 0.0
    restorations = 0
    iters_used = 0

    for it in range(opts.max_iter):
        iters_used = it + 1
        _finite_or_fail(box.eval_g(y[:nf]), box.eval_c(y[:nf]))

        err0, viol_scaled = kkt_errors(y, lam, zl, zu, 0.0)
        user_viol = _user_violation(p, box.full_point(y[:nf]))
        if err0 <= opts.opt_tol and user_viol <= opts.feas_tol:
            return _result(p, box, y[:nf], lam, sc, sf, SolveStatus.OPTIMAL,
                           err0, iters_used, user_viol)

        err_mu, _ = kkt_errors(y, lam, zl, zu, mu)
        while err_mu <= kappa_eps * mu and mu > opts.opt_tol / 10.0:
            mu = max(opts.opt_tol / 10.0, min(kappa_mu * mu, mu ** theta_mu))
            tau = max(0.99, 1.0 - mu)
            filt = [(theta_max, -np.inf)]
            err_mu, _ = kkt_errors(y, lam, zl, zu, mu)

        # Search direction from the regularized primal-dual system.
        W = box.eval_H(y[:nf], lam)
        _finite_or_fail(W.data)
        dl_ = np.where(has_l, y - yl_r, 1.0)
        du_ = np.where(has_u, yu_r - y, 1.0)
        sigma = np.where(has_l, zl / dl_, 0.0) + np.where(has_u, zu / du_, 0.0)
        Jm = jac_y(y)
        grad_phi = barrier_grad(y, mu)
        rhs = np.concatenate([-(grad_phi + (Jm.T @ lam if m else 0.0)), -residual_e(y)])

        dw = 0.0
        dc = np.zeros(m)
        got = False
        for _ in range(opts.max_cpu_factorizations):
            K = assemble_kkt(W, Jm, sigma, dw, dc)
            _, inertia = factor(K)
            pos, neg, zero = inertia
            if pos == ny and neg == m and zero == 0:
                got = True
                break
            if zero > 0 and m and not dc.any():
                dc = np.full(m, 1e-8 * max(mu, 1e-8) ** 0.25)
            if dw == 0.0:
                dw = 1e-4 if dw_last == 0.0 else max(1e-20, dw_last / 3.0)
            else:
                dw *= 100.0 if dw_last == 0.0 else 8.0
            if dw > 1e40:
                break
        if not got:
            raise _NumericFailure("could not correct KKT inertia")
        if dw > 0:
            dw_last = dw

        step = solve_kkt(K, rhs)
        dy = step[:ny]
        dlam = step[ny:] if m else np.zeros(0)
        with np.errstate(divide="ignore", invalid="ignore"):
            dzl = np.where(has_l, mu / dl_ - zl - zl * dy / dl_, 0.0)
            dzu = np.where(has_u, mu / du_ - zu + zu * dy / du_, 0.0)

        # Fraction-to-boundary step caps.
        alpha_max = _ftb(y, dy, yl_r, yu_r, has_l, has_u, tau)
        alpha_z = min(_ftb_dual(zl, dzl, has_l, tau), _ftb_dual(zu, dzu, has_u, tau))

        theta_k = theta(y)
        phi_k = barrier_phi(y, mu)
        dphi = float(grad_phi @ dy)

        accepted = False
        f_type_accept = False
        alpha = alpha_max
        alpha_min = _alpha_min(dphi, theta_k, theta_min, gamma_theta, gamma_phi,
                               delta_sw, s_theta, s_phi)
        soc_done = False
        while alpha >= alpha_min:
            y_t = y + alpha * dy
            theta_t = theta(y_t)
            phi_t = barrier_phi(y_t, mu)
            if np.isfinite(phi_t):
                ok, ftype = _acceptable(theta_k, phi_k, theta_t, phi_t, alpha, dphi,
                                        filt, theta_min, gamma_theta, gamma_phi,
                                        delta_sw, s_theta, s_phi, eta_phi)
                if ok:
                    accepted, f_type_accept = True, ftype
                    break
                # Second-order correction on the first rejected full-ish step.
                if not soc_done and alpha == alpha_max and theta_t >= theta_k and m:
                    soc_done = True
                    y_soc, ok_soc, ftype = _second_order_correction(
                        K, solve_kkt, rhs, residual_e, y, dy, alpha, ny, m, nf,
                        yl_r, yu_r, has_l, has_u, tau, theta, barrier_phi, mu,
                        theta_k, phi_k, dphi, filt, theta_min, gamma_theta,
                        gamma_phi, delta_sw, s_theta, s_phi, eta_phi)
                    if ok_soc:
                        y_t = y_soc
                        accepted, f_type_accept = True, ftype
                        break
            alpha *= 0.5
        if not accepted:
            # Feasibility restoration; its stall is the infeasibility signal.
            restorations += 1
            res = _restore(box, y, residual_e, theta, jac_y, yl_r, yu_r, has_l,
                           has_u, nf, ns, m, mu, assemble_kkt, factor, solve_kkt,
                           opts, p)
            if res is None:
                return _result(p, box, y[:nf], lam, sc, sf, SolveStatus.INFEASIBLE,
                               kkt_errors(y, lam, zl, zu, 0.0)[0], iters_used,
                               _user_violation(p, box.full_point(y[:nf])),
                               message="feasibility restoration stalled")
            y = res
            lam = np.zeros(m)
            dl_ = np.where(has_l, y - yl_r, 1.0)
            du_ = np.where(has_u, yu_r - y, 1.0)
            zl = np.where(has_l, np.clip(mu / dl_, 1e-8, 1e8), 0.0)
            zu = np.where(has_u, np.clip(mu / du_, 1e-8, 1e8), 0.0)
            filt = [(theta_max, -np.inf)]
            continue

        if not f_type_accept:
            filt.append(((1.0 - gamma_theta) * theta_k, phi_k - gamma_phi * theta_k))
        y = y_t
        lam = lam + alpha * dlam if m else lam
        zl = zl + alpha_z * dzl
        zu = zu + alpha_z * dzu
        # keep duals compatible with the barrier (sigma correction)
        dl_ = np.where(has_l, y - yl_r, 1.0)
        du_ = np.where(has_u, yu_r - y, 1.0)
        zl = np.where(has_l, np.clip(zl, mu / (kappa_sigma * dl_), kappa_sigma * mu / dl_), 0.0)
        zu = np.where(has_u, np.clip(zu, mu / (kappa_sigma * du_), kappa_sigma * mu / du_), 0.0)

        if opts.verbose:
            log.info("iter=%d mu=%.1e theta=%.2e phi=%.6e alpha=%.2e dw=%.1e",
                     it, mu, theta(y), barrier_phi(y, mu), alpha, dw)
        else:
            log.debug("iter=%d mu=%.1e theta=%.2e phi=%.6e alpha=%.2e dw=%.1e",
                      it, mu, theta(y), barrier_phi(y, mu), alpha, dw)

    err0, _ = kkt_errors(y, lam, zl, zu, 0.0)
    return _result(p, box, y[:nf], lam, sc, sf, SolveStatus.ITERATION_LIMIT,
                   err0, iters_used, _user_violation(p, box.full_point(y[:nf])))


def _ftb(y, dy, yl, yu, has_l, has_u, tau):
    alpha = 1.0
    neg = has_l & (dy < 0)
    if np.any(neg):
        alpha = min(alpha, float(np.min(-tau * (y[neg] - yl[neg]) / dy[neg])))
    pos = has_u & (dy > 0)
    if np.any(pos):
        alpha = min(alpha, float(np.min(tau * (yu[pos] - y[pos]) / dy[pos])))
    return max(alpha, 0.0)


def _ftb_dual(z, dz, mask, tau):
    alpha = 1.0
    neg = mask & (dz < 0)
    if np.any(neg):
        alpha = min(alpha, float(np.min(-tau * z[neg] / dz[neg])))
    return max(alpha, 0.0)


def _alpha_min(dphi, theta_k, theta_min, g_t, g_p, delta, s_t, s_p):
    if dphi < 0 and theta_k <= theta_min:
        return 0.05 * min(g_t, g_p * theta_k / (-dphi),
                          delta * theta_k ** s_t / (-dphi) ** s_p)
    if dphi < 0:
        return 0.05 * min(g_t, g_p * theta_k / (-dphi))
    return 0.05 * g_t


def _acceptable(theta_k, phi_k, theta_t, phi_t, alpha, dphi, filt, theta_min,
                g_t, g_p, delta, s_t, s_p, eta):
    for th_f, ph_f in filt:
        if theta_t >= th_f and phi_t >= ph_f:
            return False, False
    switching = dphi < 0 and alpha * (-dphi) ** s_p > delta * theta_k ** s_t
    if theta_k <= theta_min and switching:
        if phi_t <= phi_k + eta * alpha * dphi:
            return True, True
        return False, False
    if theta_t <= (1 - g_t) * theta_k or phi_t <= phi_k - g_p * theta_k:
        return True, False
    return False, False


def _second_order_correction(K, solve_kkt, rhs, residual_e, y, dy, alpha, ny, m,
                             nf, yl, yu, has_l, has_u, tau, theta, barrier_phi,
                             mu, theta_k, phi_k, dphi, filt, theta_min, g_t, g_p,
                             delta, s_t, s_p, eta):
    c_soc = alpha * residual_e(y) + residual_e(y + alpha * dy)
    theta_old = theta(y + alpha * dy)
    for _ in range(4):
        rhs_soc = rhs.copy()
        rhs_soc[ny:] = -c_soc
        step = solve_kkt(K, rhs_soc)
        dy_c = step[:ny]
        a = _ftb(y, dy_c, yl, yu, has_l, has_u, tau)
        y_t = y + a * dy_c
        theta_t = theta(y_t)
        phi_t = barrier_phi(y_t, mu)
        if np.isfinite(phi_t):
            ok, ftype = _acceptable(theta_k, phi_k, theta_t, phi_t, alpha, dphi,
                                    filt, theta_min, g_t, g_p, delta, s_t, s_p, eta)
            if ok:
                return y_t, True, ftype
        if theta_t > 0.99 * theta_old:
            break
        theta_old = theta_t
        c_soc = a * c_soc + residual_e(y_t)
    return y, False, False


def _restore(box, y, residual_e, theta, jac_y, yl, yu, has_l, has_u, nf, ns, m,
             mu, assemble_kkt, factor, solve_kkt, opts, p):
    """Gauss-Newton descent on the constraint violation within the bounds.

    Returns an improved point, or None when the phase stalls while the
    violation still exceeds the feasibility tolerance (the infeasibility
    certificate used by callers).
    """
    y = y.copy()
    theta_enter = theta(y)
    target = max(10.0 * opts.feas_tol, 0.1 * theta_enter)
    ny = nf + ns
    zeroW = sp.csc_matrix((nf, nf))
    for _ in range(40):
        e = residual_e(y)
        if float(np.abs(e).sum()) <= target:
            return y
        Jm = jac_y(y)
        with np.errstate(divide="ignore"):
            bar = -np.where(has_l, mu / (y - yl), 0.0) + np.where(has_u, mu / (yu - y), 0.0)
        sigma = np.where(has_l, mu / (y - yl) ** 2, 0.0) + np.where(has_u, mu / (yu - y) ** 2, 0.0)
        K = assemble_kkt(zeroW, Jm, sigma + 1e-8, 0.0, np.ones(m))
        _, inertia = factor(K)
        if inertia[2] > 0:
            return None
        step = solve_kkt(K, np.concatenate([-bar, -e]))
        dy = step[:ny]
        alpha = _ftb(y, dy, yl, yu, has_l, has_u, 0.99)
        psi0 = 0.5 * float(e @ e)
        dpsi = float((Jm.T @ e) @ dy)
        ok = False
        while alpha * float(np.abs(dy).max(initial=0.0)) >= 1e-12:
            y_t = y + alpha * dy
            e_t = residual_e(y_t)
            if 0.5 * float(e_t @ e_t) <= psi0 + 1e-4 * alpha * min(dpsi, 0.0) or \
                    float(np.abs(e_t).sum()) < float(np.abs(e).sum()):
                y = y_t
                ok = True
                break
            alpha *= 0.5
        if not ok:
            if theta(y) > opts.feas_tol:
                return None
            return y
    if theta(y) <= 0.9 * theta_enter or theta(y) <= opts.feas_tol:
        return y
    return None


def _user_violation(p: NlpProblem, x: np.ndarray) -> float:
    viol = 0.0
    if p.n_cons:
        c = np.asarray(p.constraints(x), dtype=float)
        viol = float(np.maximum(p.con_lo - c, 0.0).max(initial=0.0))
        viol = max(viol, float(np.maximum(c - p.con_hi, 0.0).max(initial=0.0)))
    viol = max(viol, float(np.maximum(p.var_lo - x, 0.0).max(initial=0.0)))
    viol = max(viol, float(np.maximum(x - p.var_hi, 0.0).max(initial=0.0)))
    return viol


def _result(p, box, xf, lam_scaled, sc, sf, status, kkt_res, iters, viol,
            message=""):
    x = box.full_point(xf)
    obj = float(p.objective(x))
    mult = (sc * lam_scaled) / sf if p.n_cons else np.zeros(0)
    return NlpResult(status, x, obj, kkt_res, iters, viol, mult, message)
