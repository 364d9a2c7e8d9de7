"""Fourier-side Lyapunov functionals and numerical audits of their decay law.

For both dampings active the energy E_hat = |U_hat|^2 / 2 dissipates only
through the y and eta components.  Three auxiliary functionals F, K, P
(cross terms chosen so their time derivatives produce the missing
|z|^2, |v|^2, |phi|^2, |u|^2 terms) combine into

    L1 = d0 (1 + xi^2) E_hat + d1 F + d2 K + P          (a = 1)
    L2 = d0 (1 + xi^2 + xi^4) E_hat + d1 F + d2 K + P   (a != 1)

which satisfy d/dt L1 + c0 xi^2 E_hat <= 0, respectively
d/dt L2 + c4 xi^2/(1+xi^2+xi^4) E_hat <= 0, once the weights are fixed in
the documented order.

Every helper constant C(.) below comes from the elementary bound
|x y| <= eps x^2 + y^2/(4 eps); the full bookkeeping is in
``_constants_ledger`` so the audit can point at the binding term when a
hand-tuned weight fails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_model import SystemParams
from .errors import PreconditionError, RegimeError
from .propagator import FourierState, SymbolPropagator

__all__ = [
    "LyapunovConstants",
    "FunctionalValues",
    "eval_functionals",
    "search_constants",
    "audit_inequality",
    "AuditReport",
    "sandwich_fit",
    "gronwall_check",
    "required_d0",
]


@dataclass(frozen=True)
class LyapunovConstants:
    d0: float
    d1: float
    d2: float
    eps1: float
    eps1p: float
    eps2: float
    eps2p: float
    eps3: float
    eps4: float

    def ordering_violations(self, params: SystemParams) -> list[str]:
        """The selection-order constraints; empty list means admissible."""
        a, k, l = params.a, params.k, params.l
        ledger = _constants_ledger(params, self)
        out = []
        if not (0 < self.eps1 < k):
            out.append(f"eps1 must lie in (0, k): {self.eps1} vs k={k}")
        if not (0 < self.eps2 < a * a * l * l):
            out.append(f"eps2 must lie in (0, a^2 l^2): {self.eps2}")
        if not (0 < self.eps3 < 1):
            out.append(f"eps3 must lie in (0, 1): {self.eps3}")
        if not (0 < self.eps4 < l * l):
            out.append(f"eps4 must lie in (0, l^2): {self.eps4}")
        if not self.d2 * (k - self.eps1) > ledger["C_P2"]:
            out.append("d2 (k - eps1) must exceed C_P2 = 2 (k l)^2 / eps4")
        # d1/2 must beat the xi^2 |v|^2 loss of the P-identity (the other
        # half of the F budget absorbs the gamma1 cross term)
        if not self.d1 > max(2.0, self.d2 * ledger["C_K2"] / (a * a * l * l - self.eps2)):
            out.append("d1 must exceed max(2, d2 C_K2 / (a^2 l^2 - eps2))")
        if not (0 < self.eps1p < (1.0 - self.eps3) / self.d2):
            out.append("eps1p must lie in (0, (1 - eps3)/d2)")
        return out


def _constants_ledger(params: SystemParams, c: LyapunovConstants) -> dict:
    """Every Young-inequality constant, keyed by the estimate it closes.

    C_F   : F-identity residual against (1 + xi^2)(|y|^2 + |eta|^2)   (a = 1)
    C_Fq  : same against (1 + xi^2 + xi^4), including the two a != 1 terms
    C_K   : K-identity residual against (1 + xi^2)(|y|^2 + |eta|^2)
    C_K2  : K-identity cost on xi^2 |z|^2
    C_P   : P-identity residual against |y|^2 + |eta|^2
    C_P2  : P-identity cost on xi^2 |phi|^2
    """
    a, k, l = params.a, params.k, params.l
    g1, g2 = params.gamma1, params.gamma2
    e1, e1p, e2, e2p, e3, e4 = c.eps1, c.eps1p, c.eps2, c.eps2p, c.eps3, c.eps4

    # the F-identity carries gamma1 xi^2 Re(v conj(y)) (the damping term of
    # y_t against the -xi^2 Re(v conj(y)) block); half of the xi^2 |v|^2
    # budget absorbs it, putting gamma1^2/2 onto the |y|^2 side
    C_F_y = a * a * l * l + 1.0 + (a * l * l * g1) ** 2 / (2.0 * e2) + g1 * g1 / 2.0
    C_F_eta = (g2 * a * l) ** 2 / (2.0 * e2)
    C_F = max(C_F_y, C_F_eta)
    # a != 1 extras: |1-a^2| l xi^2 |y||eta| and |a^2-1| |xi|^3 |u||y|
    extra = abs(1.0 - a * a) * l / 2.0
    C_Fq = max(C_F_y + extra + (a * a - 1.0) ** 2 / (4.0 * e2p if e2p > 0 else np.inf),
               C_F_eta + extra)

    C_K_eta = k + k * l / 2.0 + (l * k) ** 2 / (2.0 * e1p) + 3.0 * g2 * g2 / (4.0 * e1)
    C_K_y = k * l / 2.0 + (l * l * k) ** 2 / (2.0 * e1p) + 3.0 * (l * g1) ** 2 / (4.0 * e1)
    C_K = max(C_K_eta, C_K_y)
    C_K2 = 3.0 * (l * a) ** 2 / (4.0 * e1)

    C_P_y = 1.0 / (4.0 * e3) + l / 2.0
    C_P_eta = l * l + l / 2.0 + (l * g2) ** 2 / (2.0 * e4)
    C_P = max(C_P_y, C_P_eta)
    C_P2 = 2.0 * (k * l) ** 2 / e4
    return {"C_F": C_F, "C_Fq": C_Fq, "C_K": C_K, "C_K2": C_K2,
            "C_P": C_P, "C_P2": C_P2}


def search_constants(params: SystemParams, margin: float = 2.0) -> LyapunovConstants:
    """Fix the weights in the canonical order, each with a safety margin.

    Order: eps1..eps4 at the midpoints of their admissible intervals, then
    d2, then d1, then eps1p (and eps2p for a != 1), finally d0 large enough
    that the combined damping dominates both the differential inequality and
    the sandwich equivalence with (1 + xi^2) E_hat.
    """
    if params.gamma1 <= 0.0 or params.gamma2 <= 0.0:
        raise RegimeError("constant search requires gamma1 > 0 and gamma2 > 0")
    if params.l <= 0.0:
        raise RegimeError("constant search infeasible: eps4 < l^2 needs l > 0")
    a, k, l = params.a, params.k, params.l
    g_min = min(params.gamma1, params.gamma2)

    eps1 = k / 2.0
    eps2 = a * a * l * l / 2.0
    eps3 = 0.5
    eps4 = l * l / 2.0

    half = LyapunovConstants(d0=1, d1=1, d2=1, eps1=eps1, eps1p=1.0,
                             eps2=eps2, eps2p=0.0, eps3=eps3, eps4=eps4)
    led = _constants_ledger(params, half)
    d2 = margin * led["C_P2"] / (k - eps1)
    d1 = margin * max(2.0, d2 * led["C_K2"] / (a * a * l * l - eps2))
    eps1p = (1.0 - eps3) / (margin * d2)
    eps2p = 0.0 if abs(a - 1.0) < 1e-12 else (1.0 - eps3) / (2.0 * margin * d1)

    full = LyapunovConstants(d0=1, d1=d1, d2=d2, eps1=eps1, eps1p=eps1p,
                             eps2=eps2, eps2p=eps2p, eps3=eps3, eps4=eps4)
    led = _constants_ledger(params, full)
    CF = led["C_F"] if abs(a - 1.0) < 1e-12 else led["C_Fq"]
    d0_diss = margin * (d1 * CF + d2 * led["C_K"] + led["C_P"]) / g_min
    # sandwich: |d1 F + d2 K + P| <= C_eq (1 + xi^2) E (a = 1); require d0 > 2 C_eq
    C_eq = (d1 * (a * l * l + a * l + 1.0 + a)
            + d2 * (1.0 + l)
            + (1.0 + l + l * params.gamma2))
    d0 = max(d0_diss, margin * C_eq)
    out = LyapunovConstants(d0=d0, d1=d1, d2=d2, eps1=eps1, eps1p=eps1p,
                            eps2=eps2, eps2p=eps2p, eps3=eps3, eps4=eps4)
    violations = out.ordering_violations(params)
    if violations:
        raise RegimeError("constant search failed; binding constraints: "
                          + "; ".join(violations))
    return out


@dataclass(frozen=True)
class FunctionalValues:
    F: float
    K: float
    P: float
    L1: float
    L2: float
    E_hat: float


def _functionals_arrays(values: np.ndarray, xi, params: SystemParams,
                        consts: LyapunovConstants):
    """Vectorized F, K, P, L1, L2, E for values of shape (..., 6)."""
    a, k, l = params.a, params.k, params.l
    v, u, z, y, phi, eta = (values[..., i] for i in range(6))
    E = 0.5 * np.sum(np.abs(values) ** 2, axis=-1)

    def re_i_xy(x, ybar_of):
        return np.real(1j * xi * x * np.conj(ybar_of))

    F = (l * a * (l * re_i_xy(y, z) + re_i_xy(z, eta))
         - xi**2 * (np.real(v * np.conj(y)) + a * np.real(np.conj(z) * u)))
    K = np.real(-1j * xi * phi * np.conj(eta)) + l * np.real(-1j * xi * y * np.conj(phi))
    P = np.real(1j * xi * v * np.conj(u)) - l * np.real(v * np.conj(eta))
    L1 = consts.d0 * (1.0 + xi**2) * E + consts.d1 * F + consts.d2 * K + P
    L2 = consts.d0 * (1.0 + xi**2 + xi**4) * E + consts.d1 * F + consts.d2 * K + P
    return F, K, P, L1, L2, E


def eval_functionals(state: FourierState, params: SystemParams,
                     consts: LyapunovConstants, xi: float) -> FunctionalValues:
    """Evaluate the functionals at one on-grid frequency of a state."""
    idx = np.flatnonzero(np.isclose(state.grid, xi, rtol=0, atol=1e-12))
    if len(idx) != 1:
        raise PreconditionError(f"xi={xi} is not on the state grid")
    vals = state.values[idx[0]]
    F, K, P, L1, L2, E = _functionals_arrays(vals, xi, params, consts)
    return FunctionalValues(F=float(F), K=float(K), P=float(P),
                            L1=float(L1), L2=float(L2), E_hat=float(E))


@dataclass(frozen=True)
class AuditReport:
    params: SystemParams
    constants: LyapunovConstants
    frequencies: np.ndarray
    weight_kind: str
    max_violation: float
    violation_count: int
    c0_feasible: float
    per_frequency_violation: np.ndarray
    n_states: int
    horizon: float
    slack: float


def _lyapunov_weight(params: SystemParams, xi: np.ndarray):
    """(which functional, xi-weight of the dissipated energy term)."""
    if abs(params.a - 1.0) < 1e-12:
        return "L1", xi**2
    return "L2", xi**2 / (1.0 + xi**2 + xi**4)


def audit_inequality(params: SystemParams, consts: LyapunovConstants,
                     xi, horizon: float = 5.0, n_random: int = 100,
                     seed: int = 123, slack: float = 1e-10) -> AuditReport:
    """Trajectory audit of the decay inequality at the given frequencies.

    Evolves the 6 basis vectors plus ``n_random`` random unit states exactly,
    measures dL/dt by 4-th order central differences, and reports the largest
    violation of dL/dt + c * weight * E_hat <= 0 (at c = 0, against the
    absolute slack) together with the maximal feasible c.
    """
    if params.gamma1 <= 0.0 or params.gamma2 <= 0.0:
        raise RegimeError("audit requires gamma1 > 0 and gamma2 > 0")
    violations = consts.ordering_violations(params)
    if violations:
        raise RegimeError("constants violate the selection order: "
                          + "; ".join(violations))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    rng = np.random.default_rng(seed)
    states = np.concatenate([
        np.eye(6, dtype=complex),
        rng.normal(size=(n_random, 6)) + 1j * rng.normal(size=(n_random, 6)),
    ])
    states /= np.linalg.norm(states, axis=1, keepdims=True)
    n_states = len(states)

    use_l1 = abs(params.a - 1.0) < 1e-12
    worst = -np.inf
    count = 0
    c0 = np.inf
    per_freq = np.empty(len(xi))
    for fi, x in enumerate(xi):
        prop = SymbolPropagator(params, np.array([x]))
        h = min(1e-3, 0.02 / (1.0 + 2.0 * abs(x) * max(1.0, params.a, params.k)))
        t_samples = np.linspace(2 * h, horizon, 24)
        # five-point stencil per sample
        offsets = np.array([-2.0, -1.0, 1.0, 2.0]) * h
        stencil = (t_samples[:, None] + offsets[None, :]).ravel()
        all_t = np.concatenate([t_samples, stencil])
        # prop.P[0] has shape (6, 6, 6); propagate every probe state at once
        r = prop.r_many(all_t)[0]                        # (nt, 6)
        Q = np.einsum("jab,sb->jsa", prop.P[0], states)  # (6, nstates, 6)
        traj = np.einsum("tj,jsa->tsa", r, Q)            # (nt, nstates, 6)
        nt = len(t_samples)
        center = traj[:nt]
        neigh = traj[nt:].reshape(nt, 4, n_states, 6)

        _, _, _, L1c, L2c, Ec = _functionals_arrays(center, x, params, consts)
        Lc = L1c if use_l1 else L2c
        Ln = np.empty((nt, 4, n_states))
        for q in range(4):
            _, _, _, L1n, L2n, _ = _functionals_arrays(neigh[:, q], x, params, consts)
            Ln[:, q] = L1n if use_l1 else L2n
        dL = (Ln[:, 0] - 8.0 * Ln[:, 1] + 8.0 * Ln[:, 2] - Ln[:, 3]) / (12.0 * h)

        weight = _lyapunov_weight(params, np.array([x]))[1][0]
        viol = dL  # violation of dL/dt <= 0 beyond slack
        per_freq[fi] = float(viol.max())
        worst = max(worst, per_freq[fi])
        count += int(np.sum(viol > slack))
        good = Ec > 1e-300
        if np.any(good):
            c0 = min(c0, float(np.min(-dL[good] / (weight * Ec[good]))))

    return AuditReport(
        params=params, constants=consts, frequencies=xi,
        weight_kind="L1" if use_l1 else "L2",
        max_violation=float(worst), violation_count=int(count),
        c0_feasible=float(c0), per_frequency_violation=per_freq,
        n_states=n_states, horizon=horizon, slack=slack)


def sandwich_fit(params: SystemParams, consts: LyapunovConstants,
                 xi, n_states: int = 10_000, seed: int = 7):
    """Empirical constants of c1 sigma(xi) E <= L <= c2 sigma(xi) E.

    sigma = 1 + xi^2 for a = 1 (functional L1), 1 + xi^2 + xi^4 otherwise.
    Returns (c1, c2) fitted over random unit states at each frequency.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    rng = np.random.default_rng(seed)
    use_l1 = abs(params.a - 1.0) < 1e-12
    c1, c2 = np.inf, -np.inf
    for x in xi:
        states = rng.normal(size=(n_states, 6)) + 1j * rng.normal(size=(n_states, 6))
        states /= np.linalg.norm(states, axis=1, keepdims=True)
        _, _, _, L1v, L2v, E = _functionals_arrays(states, x, params, consts)
        L = L1v if use_l1 else L2v
        sigma = (1.0 + x * x) if use_l1 else (1.0 + x * x + x**4)
        ratio = L / (sigma * E)
        c1 = min(c1, float(ratio.min()))
        c2 = max(c2, float(ratio.max()))
    return c1, c2


def gronwall_check(params: SystemParams, consts: LyapunovConstants,
                   xi, t_grid, c0: float, seed: int = 5, n_states: int = 32):
    """Check E(xi, t) <= (c2/c1) exp(-c3 rho(xi) t) E(xi, 0) on trajectories.

    c3 = c0 / c2 with (c1, c2) the fitted sandwich constants; rho is
    xi^2/(1+xi^2) for a = 1 and xi^2/(1+xi^2+xi^4) otherwise.  Returns the
    maximal ratio of observed to allowed energy (<= 1 means the bound holds)
    together with (c1, c2, c3).
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    t_grid = np.asarray(t_grid, dtype=float)
    c1, c2 = sandwich_fit(params, consts, xi, seed=seed)
    if c1 <= 0:
        raise RegimeError(f"sandwich lower constant is not positive (c1={c1}); "
                          "d0 too small for equivalence")
    c3 = c0 / c2
    rng = np.random.default_rng(seed)
    worst = 0.0
    for x in xi:
        prop = SymbolPropagator(params, np.array([x]))
        states = rng.normal(size=(n_states, 6)) + 1j * rng.normal(size=(n_states, 6))
        states /= np.linalg.norm(states, axis=1, keepdims=True)
        r = prop.r_many(t_grid)[0]
        Q = np.einsum("jab,sb->jsa", prop.P[0], states)
        traj = np.einsum("tj,jsa->tsa", r, Q)
        E = 0.5 * np.sum(np.abs(traj) ** 2, axis=-1)      # (nt, nstates)
        E0 = 0.5
        rho = x * x / (1.0 + x * x) if abs(params.a - 1.0) < 1e-12 \
            else x * x / (1.0 + x * x + x**4)
        allowed = (c2 / c1) * np.exp(-c3 * rho * t_grid)[:, None] * E0
        worst = max(worst, float((E / allowed).max()))
    return worst, (c1, c2, c3)


def required_d0(params: SystemParams, lo: float = 1e-3, hi: float | None = None,
                xi=(0.1, 1.0, 10.0), horizon: float = 3.0,
                n_random: int = 24, tol: float = 0.05) -> float:
    """Minimal d0 passing the trajectory audit, found by bisection.

    All other constants stay at their searched values; only d0 varies.
    """
    base = search_constants(params)
    if hi is None:
        hi = base.d0

    def passes(d0: float) -> bool:
        c = LyapunovConstants(d0=d0, d1=base.d1, d2=base.d2, eps1=base.eps1,
                              eps1p=base.eps1p, eps2=base.eps2, eps2p=base.eps2p,
                              eps3=base.eps3, eps4=base.eps4)
        rep = audit_inequality(params, c, xi, horizon=horizon,
                               n_random=n_random)
        return rep.violation_count == 0 and rep.c0_feasible > 0

    if not passes(hi):
        raise RegimeError("searched constants fail their own audit")
    while hi / lo > 1.0 + tol:
        mid = np.sqrt(lo * hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return hi
