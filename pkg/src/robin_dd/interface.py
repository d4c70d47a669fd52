"""Discrete Steklov-Poincare operators and the Robin-Robin / Peaceman-Rachford iterations.

Dual interface vectors (the images ``S_i eta``) are paired with traces by
the plain dot product.  The L2(Gamma)-identified operator is recovered as
``M^{-1} S_i eta`` with ``M`` the interface mass matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import fem
from .diagnostics import ConvergenceHistory, IterationRecord
from .fem import Quadrature, Source
from .mesh import Decomposition, restrict, trace
from .pstructure import PStructure
from .subsolver import (
    NewtonConfig, NewtonDivergence, SubdomainProblem, interface_flux,
    solve_dirichlet, solve_neumann, solve_robin,
)

log = logging.getLogger(__name__)


def steklov_apply(dec: Decomposition, i: int, ps: PStructure, f: Source, eta,
                  cfg: NewtonConfig, quad: Quadrature | None = None,
                  warm_start=None) -> np.ndarray:
    """<S_i eta, mu_k> = a_i(F_i eta, R_i mu_k) - (f_i, R_i mu_k) for each interface basis mu_k."""
    u, _ = solve_dirichlet(SubdomainProblem.dirichlet(dec, i, ps, f, eta, quad), cfg, warm_start)
    return interface_flux(dec, i, ps, f, u, quad)


def steklov_residual(dec: Decomposition, ps: PStructure, f: Source, eta,
                     cfg: NewtonConfig, quad: Quadrature | None = None) -> np.ndarray:
    """S_1 eta + S_2 eta; vanishes exactly at the trace of the global solution."""
    return (steklov_apply(dec, 1, ps, f, eta, cfg, quad)
            + steklov_apply(dec, 2, ps, f, eta, cfg, quad))


class _Riesz:
    """Interface mass matrix with a cached Cholesky factor."""

    def __init__(self, dec: Decomposition, quad: Quadrature | None):
        self.M = fem.interface_mass(dec, quad)
        self._chol = cho_factor(self.M)

    def inv(self, dual: np.ndarray) -> np.ndarray:
        return cho_solve(self._chol, dual)

    def norm(self, eta: np.ndarray) -> float:
        return fem.l2_gamma_norm(self.M, eta)


@dataclass(frozen=True, eq=False)
class InterfaceState:
    """Iterate n: traces, subdomain solutions (u_i = F_i eta_i) and their interface fluxes."""

    n: int
    s: float
    eta2: np.ndarray
    u2: np.ndarray
    flux2: np.ndarray
    eta1: np.ndarray | None = None
    u1: np.ndarray | None = None
    flux1: np.ndarray | None = None
    newton1: int = 0
    newton2: int = 0


def neumann_start(dec: Decomposition, ps: PStructure, f: Source, cfg: NewtonConfig,
                  quad: Quadrature | None = None) -> np.ndarray:
    """Initial trace solving <S_2 eta, mu> = 0 for all mu."""
    u, _ = solve_neumann(dec, 2, ps, f, cfg, quad)
    return trace(dec, 2, u)


def initial_state(dec: Decomposition, ps: PStructure, f: Source, s: float, eta2_0,
                  cfg: NewtonConfig, quad: Quadrature | None = None) -> InterfaceState:
    if not s > 0:
        raise ValueError("Robin parameter s must be positive")
    eta2_0 = np.asarray(eta2_0, dtype=float)
    u2, rep = solve_dirichlet(SubdomainProblem.dirichlet(dec, 2, ps, f, eta2_0, quad), cfg)
    return InterfaceState(0, float(s), eta2_0.copy(), u2, interface_flux(dec, 2, ps, f, u2, quad),
                          newton2=rep.iterations)


def _robin_half(dec, side, ps, f, s, chi, cfg, quad, warm):
    try:
        return solve_robin(SubdomainProblem.robin(dec, side, ps, f, s, chi, quad), cfg, warm)
    except NewtonDivergence as err:
        err.half_step = side
        err.args = (f"half-step {side} (Robin solve on subdomain {side}): {err.args[0]}",)
        raise


def robin_robin_step(state: InterfaceState, dec: Decomposition, ps: PStructure, f: Source,
                     cfg: NewtonConfig, quad: Quadrature | None = None,
                     strict_recompute: bool = False) -> InterfaceState:
    """One sweep: Robin solve on subdomain 1 from the data of u_2^n, then on 2 from u_1^{n+1}.

    The dual datum ``s M eta_j - S_j eta_j`` reuses the interface flux stored
    with the neighbouring solution; ``strict_recompute`` recomputes it with
    a fresh Dirichlet solve instead.
    """
    M = fem.interface_mass(dec, quad)
    s = state.s
    flux2 = state.flux2
    if strict_recompute:
        flux2 = steklov_apply(dec, 2, ps, f, state.eta2, cfg, quad, warm_start=state.u2)
    chi1 = s * (M @ state.eta2) - flux2
    u1, rep1 = _robin_half(dec, 1, ps, f, s, chi1, cfg, quad, state.u1)
    eta1 = trace(dec, 1, u1)
    flux1 = interface_flux(dec, 1, ps, f, u1, quad)
    if strict_recompute:
        flux1 = steklov_apply(dec, 1, ps, f, eta1, cfg, quad, warm_start=u1)
    chi2 = s * (M @ eta1) - flux1
    u2, rep2 = _robin_half(dec, 2, ps, f, s, chi2, cfg, quad, state.u2)
    eta2 = trace(dec, 2, u2)
    return InterfaceState(state.n + 1, s, eta2, u2, interface_flux(dec, 2, ps, f, u2, quad),
                          eta1, u1, flux1, rep1.iterations, rep2.iterations)


def peaceman_rachford_step(state: InterfaceState, dec: Decomposition, ps: PStructure,
                           f: Source, cfg: NewtonConfig, quad: Quadrature | None = None,
                           _riesz: _Riesz | None = None) -> InterfaceState:
    """One step of (sI + S1) eta1 = (sI - S2) eta2, (sI + S2) eta2' = (sI - S1) eta1 on L2(Gamma).

    The L2 operators ``M^{-1} S_i eta`` are materialized from fresh Dirichlet
    solves and each resolvent is evaluated with a Robin solve on the Riesz
    image of its right-hand side.
    """
    R = _riesz or _Riesz(dec, quad)
    s = state.s
    L2_S2 = R.inv(steklov_apply(dec, 2, ps, f, state.eta2, cfg, quad, warm_start=state.u2))
    w1 = s * state.eta2 - L2_S2
    u1, rep1 = _robin_half(dec, 1, ps, f, s, R.M @ w1, cfg, quad, state.u1)
    eta1 = trace(dec, 1, u1)
    L2_S1 = R.inv(steklov_apply(dec, 1, ps, f, eta1, cfg, quad, warm_start=u1))
    w2 = s * eta1 - L2_S1
    u2, rep2 = _robin_half(dec, 2, ps, f, s, R.M @ w2, cfg, quad, state.u2)
    eta2 = trace(dec, 2, u2)
    return InterfaceState(state.n + 1, s, eta2, u2, interface_flux(dec, 2, ps, f, u2, quad),
                          eta1, u1, interface_flux(dec, 1, ps, f, u1, quad),
                          rep1.iterations, rep2.iterations)


@dataclass(frozen=True, eq=False)
class Reference:
    """Global discrete solution and the interface quantities derived from it."""

    u_global: np.ndarray
    eta: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    flux1: np.ndarray
    flux2: np.ndarray


def reference_from_global(dec: Decomposition, ps: PStructure, f: Source, u_global,
                          quad: Quadrature | None = None) -> Reference:
    u1, u2 = restrict(dec, 1, u_global), restrict(dec, 2, u_global)
    return Reference(np.asarray(u_global, float), trace(dec, 1, u1), u1, u2,
                     interface_flux(dec, 1, ps, f, u1, quad),
                     interface_flux(dec, 2, ps, f, u2, quad))


@dataclass(frozen=True)
class StopCriteria:
    tol_gap: float = 1e-8
    max_outer: int = 200
    tol_flux: float | None = None

    def __post_init__(self):
        if not self.tol_gap > 0 or self.max_outer < 1:
            raise ValueError("need tol_gap > 0 and max_outer >= 1")


def run(dec: Decomposition, ps: PStructure, f: Source, s: float = 1.0, eta2_0=None,
        stop: StopCriteria = StopCriteria(), cfg: NewtonConfig = NewtonConfig(),
        reference: Reference | None = None, quad: Quadrature | None = None,
        method: str = "robin", strict_recompute: bool = False,
        metadata: dict | None = None) -> ConvergenceHistory:
    """Iterate until the interface gap |eta_1^n - eta_2^n|_{L2(Gamma)} <= ``stop.tol_gap``.

    ``eta2_0=None`` starts from the trace solving <S_2 eta, mu> = 0.  A
    ``reference`` enables the error, contraction and pairing columns.  A
    run that hits ``max_outer`` returns its partial history with
    ``converged=False``.
    """
    if method not in ("robin", "pr"):
        raise ValueError(f"unknown method {method!r}")
    R = _Riesz(dec, quad)
    if eta2_0 is None:
        eta2_0 = neumann_start(dec, ps, f, cfg, quad)
    state = initial_state(dec, ps, f, s, eta2_0, cfg, quad)

    meta = {"p": ps.p, "r": ps.r, "s": float(s), "preset": ps.name,
            "h": _mesh_width(dec), "tol_gap": stop.tol_gap, "max_outer": stop.max_outer,
            "newton_tol": cfg.tol_residual, "method": method}
    meta.update(metadata or {})
    hist = ConvergenceHistory(metadata=meta, has_reference=reference is not None)

    def mu_lambda(eta2, flux2):
        de = eta2 - reference.eta
        dS = R.inv(flux2 - reference.flux2)
        return R.norm(s * de + dS), R.norm(s * de - dS)

    if reference is not None:
        mu0, lam0 = mu_lambda(state.eta2, state.flux2)
        hist.initial = {
            "mu_err": mu0, "lambda_err": lam0,
            "err_eta2": R.norm(state.eta2 - reference.eta),
            "pairing2": float((state.flux2 - reference.flux2) @ (state.eta2 - reference.eta)),
        }

    for n in range(1, stop.max_outer + 1):
        if method == "robin":
            state = robin_robin_step(state, dec, ps, f, cfg, quad, strict_recompute)
        else:
            state = peaceman_rachford_step(state, dec, ps, f, cfg, quad, _riesz=R)
        gap = R.norm(state.eta1 - state.eta2)
        rec = IterationRecord(n, gap, newton1=state.newton1, newton2=state.newton2,
                              flux_balance=float(np.linalg.norm(state.flux1 + state.flux2)))
        if reference is not None:
            ref = reference
            rec.err_eta1 = R.norm(state.eta1 - ref.eta)
            rec.err_eta2 = R.norm(state.eta2 - ref.eta)
            rec.err_u1 = fem.norm_w1p(dec.sub(1), state.u1 - ref.u1, ps, quad)
            rec.err_u2 = fem.norm_w1p(dec.sub(2), state.u2 - ref.u2, ps, quad)
            rec.mu_err, rec.lambda_err = mu_lambda(state.eta2, state.flux2)
            rec.pairing1 = float((state.flux1 - ref.flux1) @ (state.eta1 - ref.eta))
            rec.pairing2 = float((state.flux2 - ref.flux2) @ (state.eta2 - ref.eta))
        hist.append(rec)
        log.debug("iteration %d gap %.3e", n, gap)
        done = gap <= stop.tol_gap
        if stop.tol_flux is not None:
            done = done and rec.flux_balance <= stop.tol_flux
        if done:
            hist.converged = True
            break
    hist.final_state = state
    return hist


def _mesh_width(dec: Decomposition) -> float:
    m = dec.mesh
    if m.dim == 1:
        return float(np.max(m.measures))
    x = m.points[m.cells]
    edges = np.linalg.norm(x - np.roll(x, 1, axis=1), axis=2)
    return float(edges.max())

