"""Log-barrier interior-point solver for the convex inner problems.

The problem class is exactly what the outer loop produces:

    minimize    c @ x  (+ constant)
    subject to  A @ x <= b                                  (affine rows)
                sum_i w_i * ln(r_i @ x + o_i) + d @ x + e >= 0   (log rows)

with all log weights w_i >= 0, so every log row is concave and its
superlevel set is convex.  Newton steps with backtracking run on

    F_mu(x) = mu * (c @ x) - sum ln(slack)

and mu grows geometrically until the barrier duality gap m / mu falls
under the configured tolerance.  A single-slack phase-I restores strict
feasibility or returns an infeasibility certificate.

Solutions are cross-checked by an independent KKT verifier that recomputes
slacks, gradients, and residuals from the problem data alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .model import SolverConfig

# Armijo parameters and the fraction-to-boundary cap for the line search.
ARMIJO_ALPHA = 0.01
ARMIJO_BETA = 0.5
STEP_FRACTION = 0.99
MIN_STEP = 1e-14
MAX_INNER_STEPS = 80
MAX_STAGES = 64
PHASE1_EPS_FEAS = 1e-9
PHASE1_GAP = 1e-4
# Newton region where the pure (capped) step is taken without Armijo tests;
# F differences are below float noise there while the decrement is reliable.
NEWTON_DAMPED_REGION = 0.25


class InfeasibleError(RuntimeError):
    """The constraint set admits no strictly feasible point.

    Carries the minimized maximum violation as a certificate.
    """

    def __init__(self, message, max_violation=None):
        super().__init__(message)
        self.max_violation = max_violation


class SolverNumericsError(RuntimeError):
    """The barrier objective failed to decrease monotonically."""


@dataclass(frozen=True)
class LogConstraint:
    """sum_i coef_i * ln(arg_rows_i @ x + arg_off_i) + lin @ x + const >= 0."""

    coef: np.ndarray       # (T,) nonnegative
    arg_rows: np.ndarray   # (T, n)
    arg_off: np.ndarray    # (T,)
    lin: np.ndarray        # (n,)
    const: float
    label: str = ""

    def args(self, x: np.ndarray) -> np.ndarray:
        return self.arg_rows @ x + self.arg_off

    def value(self, x: np.ndarray, u: np.ndarray | None = None) -> float:
        if u is None:
            u = self.args(x)
        return float(self.coef @ np.log(u) + self.lin @ x + self.const)

    def grad(self, x: np.ndarray, u: np.ndarray | None = None) -> np.ndarray:
        if u is None:
            u = self.args(x)
        return self.arg_rows.T @ (self.coef / u) + self.lin


@dataclass
class SurrogateProblem:
    """One convex instance: linear objective, affine rows, log rows.

    interior_hint is a point with every log argument strictly positive; it
    seeds phase-I when no better start is available.  layout is opaque
    packing metadata owned by the instance builder.
    """

    n: int
    c: np.ndarray
    obj_const: float
    A: np.ndarray
    b: np.ndarray
    logcons: list[LogConstraint]
    row_labels: list[str]
    interior_hint: np.ndarray
    layout: object = None
    name: str = ""
    # Epigraph variable, if any: enters affine rows with negative coefficient
    # and log rows with positive linear coefficient only, so raising it can
    # always satisfy those rows.  Phase-I skips them and back-fills its value.
    aux_col: int | None = None

    @property
    def num_constraints(self) -> int:
        return self.A.shape[0] + len(self.logcons)

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.obj_const)

    def affine_slacks(self, x: np.ndarray) -> np.ndarray:
        return self.b - self.A @ x

    def log_values(self, x: np.ndarray):
        vals = np.empty(len(self.logcons))
        ok = True
        for j, lc in enumerate(self.logcons):
            u = lc.args(x)
            if u.min(initial=np.inf) <= 0.0:
                ok = False
                vals[j] = -np.inf
            else:
                vals[j] = lc.value(x, u)
        return vals, ok

    def min_slack(self, x: np.ndarray) -> float:
        """Smallest constraint slack; -inf when a log argument is nonpositive."""
        worst = np.inf
        if self.A.shape[0]:
            worst = float(self.affine_slacks(x).min())
        vals, ok = self.log_values(x)
        if not ok:
            return -np.inf
        if len(vals):
            worst = min(worst, float(vals.min()))
        return worst

    def dump(self, path) -> None:
        """Write the instance in coordinate form for offline inspection."""
        ii, jj = np.nonzero(self.A)
        payload = {
            "name": self.name,
            "n": self.n,
            "objective": {"c": self.c.tolist(), "const": self.obj_const},
            "affine": {
                "coords": [[int(i), int(j), float(self.A[i, j])] for i, j in zip(ii, jj)],
                "b": self.b.tolist(),
                "labels": self.row_labels,
            },
            "log_rows": [
                {
                    "label": lc.label,
                    "coef": lc.coef.tolist(),
                    "arg_rows": lc.arg_rows.tolist(),
                    "arg_off": lc.arg_off.tolist(),
                    "lin": lc.lin.tolist(),
                    "const": lc.const,
                }
                for lc in self.logcons
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)


@dataclass(frozen=True)
class KKTReport:
    stationarity: float
    primal: float
    dual: float
    complementarity: float
    residual: float
    ok: bool


@dataclass
class SubproblemSolution:
    x: np.ndarray
    objective: float
    status: str                      # "optimal" | "infeasible" | "max-iterations"
    kkt_residual: float
    duals_affine: np.ndarray
    duals_log: np.ndarray
    mu_final: float
    newton_steps: int
    message: str = ""
    certificate: float | None = None
    kkt: KKTReport | None = None


@dataclass(frozen=True)
class Phase1Result:
    status: str                      # "feasible" | "infeasible"
    x: np.ndarray | None
    max_violation: float
    newton_steps: int = 0


def _barrier_value(prob: SurrogateProblem, x: np.ndarray, mu: float) -> float:
    s = prob.affine_slacks(x)
    if s.size and s.min() <= 0.0:
        return np.inf
    val = mu * float(prob.c @ x)
    if s.size:
        val -= float(np.log(s).sum())
    for lc in prob.logcons:
        u = lc.args(x)
        if u.min(initial=np.inf) <= 0.0:
            return np.inf
        g = lc.value(x, u)
        if g <= 0.0:
            return np.inf
        val -= np.log(g)
    return val


def _grad_hess(prob: SurrogateProblem, x: np.ndarray, mu: float):
    s = prob.affine_slacks(x)
    w = 1.0 / s
    grad = mu * prob.c + prob.A.T @ w
    Aw = prob.A * w[:, None]
    H = Aw.T @ Aw
    for lc in prob.logcons:
        u = lc.args(x)
        g = lc.value(x, u)
        ggrad = lc.grad(x, u)
        grad -= ggrad / g
        H += np.outer(ggrad, ggrad) / (g * g)
        Ru = lc.arg_rows * (np.sqrt(lc.coef) / u)[:, None]
        H += (Ru.T @ Ru) / g
    return grad, H


def _max_step(prob: SurrogateProblem, x: np.ndarray, d: np.ndarray) -> float:
    """Largest step keeping every affine slack and log argument at >= 1% of
    its current value; log-row values themselves are verified by evaluation."""
    t = 1.0
    if prob.A.shape[0]:
        s = prob.affine_slacks(x)
        Ad = prob.A @ d
        dec = Ad > 0
        if dec.any():
            t = min(t, STEP_FRACTION * float((s[dec] / Ad[dec]).min()))
    for lc in prob.logcons:
        u = lc.args(x)
        du = lc.arg_rows @ d
        dec = du < 0
        if dec.any():
            t = min(t, STEP_FRACTION * float((u[dec] / (-du[dec])).min()))
    return t


def _solve_newton_system(H: np.ndarray, grad: np.ndarray) -> np.ndarray | None:
    jitter = 0.0
    base = max(float(np.trace(H)) / max(H.shape[0], 1), 1.0)
    for attempt in range(4):
        try:
            Hj = H if jitter == 0.0 else H + jitter * np.eye(H.shape[0])
            fac = cho_factor(Hj, lower=True, check_finite=False)
            return cho_solve(fac, -grad, check_finite=False)
        except LinAlgError:
            jitter = base * (1e-14 if attempt == 0 else jitter / base * 100.0)
    try:
        return np.linalg.solve(H + base * 1e-8 * np.eye(H.shape[0]), -grad)
    except np.linalg.LinAlgError:
        return None


def _center(prob: SurrogateProblem, x: np.ndarray, mu: float, newton_tol: float,
            early_stop=None):
    """Damped-Newton minimization of F_mu from a strictly feasible x.

    Returns (x, steps, converged).  The barrier value is required to be
    non-increasing on every accepted step; steps that cannot decrease it are
    rejected and end the centering stage.
    """
    f_cur = _barrier_value(prob, x, mu)
    if not np.isfinite(f_cur):
        raise SolverNumericsError("centering started outside the barrier domain")
    for step in range(MAX_INNER_STEPS):
        grad, H = _grad_hess(prob, x, mu)
        d = _solve_newton_system(H, grad)
        if d is None:
            return x, step, False
        slope = float(grad @ d)           # = -d' H d at the exact solve
        dec2 = max(-slope, 0.0)
        if 0.5 * dec2 <= newton_tol:
            return x, step, True
        t = min(1.0, _max_step(prob, x, d))
        lam = np.sqrt(dec2)
        accepted = False
        while t >= MIN_STEP:
            x_new = x + t * d
            f_new = _barrier_value(prob, x_new, mu)
            if np.isfinite(f_new):
                if lam <= NEWTON_DAMPED_REGION:
                    # Quadratic-convergence region: F differences sit below
                    # float noise, accept the capped step if not increasing.
                    if f_new <= f_cur + 1e-12 * (1.0 + abs(f_cur)):
                        accepted = True
                elif f_new <= f_cur + ARMIJO_ALPHA * t * slope:
                    accepted = True
            if accepted:
                x, f_cur = x_new, f_new
                break
            t *= ARMIJO_BETA
        if not accepted:
            return x, step + 1, False
    return x, MAX_INNER_STEPS, False


def _strip_aux(prob: SurrogateProblem):
    """Remove the epigraph variable and every row it appears in.

    Those rows are satisfiable for any x by raising the epigraph variable,
    so the reduced rows decide feasibility of the whole instance.  Returns
    (A, b, labels, logcons, keep_cols).
    """
    if prob.aux_col is None:
        return prob.A, prob.b, list(prob.row_labels), list(prob.logcons), np.arange(prob.n)
    aux = prob.aux_col
    keep_cols = np.array([i for i in range(prob.n) if i != aux])
    keep_rows = []
    for r in range(prob.A.shape[0]):
        coef = prob.A[r, aux]
        if coef == 0.0:
            keep_rows.append(r)
        elif coef > 0.0:
            raise SolverNumericsError("epigraph variable bounded above by an affine row")
    A = prob.A[keep_rows][:, keep_cols]
    b = prob.b[keep_rows]
    labels = [prob.row_labels[r] for r in keep_rows]
    logcons = []
    for lc in prob.logcons:
        if lc.lin[aux] == 0.0:
            if np.any(lc.arg_rows[:, aux] != 0.0):
                raise SolverNumericsError("epigraph variable inside a log argument")
            logcons.append(LogConstraint(coef=lc.coef, arg_rows=lc.arg_rows[:, keep_cols],
                                         arg_off=lc.arg_off, lin=lc.lin[keep_cols],
                                         const=lc.const, label=lc.label))
        elif lc.lin[aux] < 0.0:
            raise SolverNumericsError("epigraph variable bounded above by a log row")
    return A, b, labels, logcons, keep_cols


def _fill_aux(prob: SurrogateProblem, x: np.ndarray, margin: float = 1.0) -> np.ndarray:
    """Set the epigraph variable so all its rows hold with the given margin."""
    if prob.aux_col is None:
        return x
    aux = prob.aux_col
    x = x.copy()
    x[aux] = 0.0
    needed = -np.inf
    for r in range(prob.A.shape[0]):
        coef = prob.A[r, aux]
        if coef < 0.0:
            slack0 = prob.b[r] - float(prob.A[r] @ x)
            needed = max(needed, (margin - slack0) / (-coef))
    for lc in prob.logcons:
        if lc.lin[aux] > 0.0:
            g0 = lc.value(x)
            needed = max(needed, (margin - g0) / lc.lin[aux])
    x[aux] = 0.0 if needed == -np.inf else needed
    return x


def phase1_feasible(prob: SurrogateProblem, hint: np.ndarray | None = None,
                    cfg: SolverConfig | None = None) -> Phase1Result:
    """Return a strictly feasible point or an infeasibility certificate.

    A candidate (the hint, then the builder's interior point) is accepted
    unchanged when every slack is strictly positive.  Otherwise a single
    slack s is added to all non-epigraph inequalities and minimized by the
    same barrier machinery until s is safely negative or its optimum proves
    the instance infeasible; the epigraph variable is back-filled afterwards
    since raising it satisfies its rows by construction.
    """
    cfg = cfg or SolverConfig()
    for cand in (hint, prob.interior_hint):
        if cand is None:
            continue
        cand = np.asarray(cand, dtype=float)
        if prob.min_slack(cand) > 0.0:
            return Phase1Result(status="feasible", x=cand, max_violation=-prob.min_slack(cand))

    A_red, b_red, labels, logcons, keep_cols = _strip_aux(prob)
    base = np.asarray(prob.interior_hint, dtype=float)[keep_cols]
    n_red = len(keep_cols)

    # Extended problem over (x, s): rows A x - s <= b, log rows g(x) + s >= 0,
    # plus the safety floor s >= -1 (never active before the early stop).
    A_ext = np.hstack([A_red, -np.ones((A_red.shape[0], 1))])
    floor_row = np.zeros((1, n_red + 1))
    floor_row[0, -1] = -1.0
    A_ext = np.vstack([A_ext, floor_row])
    b_ext = np.concatenate([b_red, [1.0]])
    logcons_ext = []
    for lc in logcons:
        lin = np.concatenate([lc.lin, [1.0]])
        rows = np.hstack([lc.arg_rows, np.zeros((lc.arg_rows.shape[0], 1))])
        logcons_ext.append(LogConstraint(coef=lc.coef, arg_rows=rows,
                                         arg_off=lc.arg_off, lin=lin,
                                         const=lc.const, label=lc.label))
    c_ext = np.zeros(n_red + 1)
    c_ext[-1] = 1.0

    viol = 0.0
    if A_red.shape[0]:
        viol = max(viol, float((A_red @ base - b_red).max()))
    for lc in logcons:
        u = lc.args(base)
        if u.min(initial=np.inf) <= 0.0:
            raise SolverNumericsError("interior hint leaves a log argument nonpositive")
        viol = max(viol, -lc.value(base, u))
    s0 = viol + 1.0
    z = np.concatenate([base, [s0]])

    ext = SurrogateProblem(n=n_red + 1, c=c_ext, obj_const=0.0, A=A_ext, b=b_ext,
                           logcons=logcons_ext, row_labels=labels + ["s-floor"],
                           interior_hint=z, name=prob.name + ":phase1")

    def assemble(z_vec) -> np.ndarray:
        x = np.zeros(prob.n)
        x[keep_cols] = z_vec[:n_red]
        return _fill_aux(prob, x)

    m = ext.num_constraints
    mu = cfg.barrier_mu0
    steps_total = 0
    newton_tol = 1e-10
    for _ in range(MAX_STAGES):
        z, steps, _ = _center(ext, z, mu, newton_tol)
        steps_total += steps
        if z[-1] < -PHASE1_EPS_FEAS:
            x = assemble(z)
            if prob.min_slack(x) > 0.0:
                return Phase1Result(status="feasible", x=x,
                                    max_violation=float(z[-1]),
                                    newton_steps=steps_total)
        if m / mu <= PHASE1_GAP:
            break
        mu *= cfg.barrier_growth
    # Optimum of the slack is nonnegative (within the coarse gap): infeasible.
    return Phase1Result(status="infeasible", x=assemble(z),
                        max_violation=float(z[-1]), newton_steps=steps_total)


def solve(prob: SurrogateProblem, start: np.ndarray | None,
          cfg: SolverConfig | None = None) -> SubproblemSolution:
    """Barrier solve from an optional warm start.

    Deterministic given (prob, start, cfg).  status is "optimal" only when
    the independent KKT verifier passes at kkt_tol.
    """
    cfg = cfg or SolverConfig()
    feas = phase1_feasible(prob, hint=start, cfg=cfg)
    if feas.status != "feasible":
        return SubproblemSolution(
            x=feas.x, objective=np.nan, status="infeasible",
            kkt_residual=np.inf, duals_affine=np.empty(0), duals_log=np.empty(0),
            mu_final=0.0, newton_steps=feas.newton_steps,
            message=f"phase-I minimum max-violation {feas.max_violation:.3e}",
            certificate=feas.max_violation)

    x = feas.x
    m = prob.num_constraints
    mu = cfg.barrier_mu0
    newton_tol = 0.5 * cfg.kkt_tol ** 2
    steps_total = feas.newton_steps
    gap_ok = False
    for _ in range(MAX_STAGES):
        x, steps, _ = _center(prob, x, mu, newton_tol)
        steps_total += steps
        if m / mu <= cfg.kkt_tol:
            gap_ok = True
            break
        mu *= cfg.barrier_growth

    s = prob.affine_slacks(x)
    duals_affine = 1.0 / (mu * s) if s.size else np.empty(0)
    gvals, _ = prob.log_values(x)
    duals_log = 1.0 / (mu * gvals) if len(gvals) else np.empty(0)
    report = verify_kkt(prob, x, duals_affine, duals_log, tol=cfg.kkt_tol)
    status = "optimal" if (gap_ok and report.ok) else "max-iterations"
    return SubproblemSolution(
        x=x, objective=prob.objective(x), status=status,
        kkt_residual=report.residual, duals_affine=duals_affine,
        duals_log=duals_log, mu_final=mu, newton_steps=steps_total,
        message="" if status == "optimal" else "gap or KKT tolerance not reached",
        kkt=report)


def verify_kkt(prob: SurrogateProblem, x: np.ndarray, duals_affine: np.ndarray,
               duals_log: np.ndarray, tol: float = 1e-6) -> KKTReport:
    """Independent KKT check; recomputes everything from the problem data.

    Residual components: primal feasibility (worst violation), dual
    feasibility (worst negative multiplier), complementary slackness scaled
    by 1 + |objective|, and per-component scaled stationarity of
    c + A' lam - sum lam_j grad g_j.
    """
    x = np.asarray(x, dtype=float)
    s = prob.affine_slacks(x)
    primal = float(max(0.0, -(s.min()) if s.size else 0.0))
    gvals, ok = prob.log_values(x)
    if not ok:
        primal = np.inf
    elif len(gvals):
        primal = max(primal, float(max(0.0, -(gvals.min()))))

    dual = 0.0
    if duals_affine.size:
        dual = max(dual, float(max(0.0, -(duals_affine.min()))))
    if duals_log.size:
        dual = max(dual, float(max(0.0, -(duals_log.min()))))

    r = prob.c.copy()
    denom = np.maximum(np.abs(prob.c), 1.0)
    if duals_affine.size:
        r += prob.A.T @ duals_affine
        denom = np.maximum(denom, np.abs(prob.A.T) @ duals_affine)
    comp = 0.0
    if duals_affine.size:
        comp = float(np.abs(duals_affine * s).max())
    for lc, lam in zip(prob.logcons, duals_log):
        ggrad = lc.grad(x)
        r -= lam * ggrad
        denom = np.maximum(denom, abs(lam) * np.abs(ggrad))
    if duals_log.size and len(gvals):
        comp = max(comp, float(np.abs(duals_log * gvals).max()))

    stationarity = float(np.max(np.abs(r) / denom)) if prob.n else 0.0
    obj_scale = 1.0 + abs(prob.objective(x))
    comp_scaled = comp / obj_scale
    residual = max(stationarity, primal, dual, comp_scaled)
    return KKTReport(stationarity=stationarity, primal=primal, dual=dual,
                     complementarity=comp_scaled, residual=residual,
                     ok=bool(residual <= tol))
