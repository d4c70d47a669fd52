"""Damped Newton and the nonlinear subdomain solves.

``solve_dirichlet`` realizes the discrete Dirichlet solution operator: the
interface values are pinned and the remaining equations are solved.
``solve_robin`` leaves the interface free and adds the Robin term
``s (T u, T v)_Gamma`` together with a dual datum ``chi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fem
from .fem import Quadrature, Source
from .mesh import DIRICHLET, Decomposition
from .pstructure import PStructure


@dataclass(frozen=True)
class NewtonConfig:
    tol_residual: float = 1e-10
    max_iter: int = 50
    damping: float = 0.5
    max_backtracks: int = 80
    eps_reg: float = 1e-10

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.damping < 1:
            raise ValueError("damping factor must lie in (0, 1)")
        if self.max_backtracks < 0 or self.eps_reg < 0:
            raise ValueError("max_backtracks and eps_reg must be nonnegative")


@dataclass
class NewtonReport:
    iterations: int = 0
    residuals: list[float] = field(default_factory=list)
    backtracks: list[int] = field(default_factory=list)
    eps_reg: float | None = None

    @property
    def final_residual(self) -> float:
        return self.residuals[-1]

    def as_dict(self) -> dict:
        return {"iterations": self.iterations, "final_residual": self.final_residual,
                "backtracks": sum(self.backtracks), "eps_reg": self.eps_reg}


class NewtonDivergence(RuntimeError):
    def __init__(self, msg: str, report: NewtonReport, reason: str = "max_iter"):
        super().__init__(msg)
        self.report = report
        self.reason = reason
        self.half_step: int | None = None


def newton_iterate(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], sp.spmatrix],
    start: np.ndarray,
    cfg: NewtonConfig,
) -> tuple[np.ndarray, NewtonReport]:
    """Damped Newton with backtracking on the Euclidean residual norm.

    A step ``t = beta**k`` is accepted for the smallest ``k`` with
    ``|r(u + t du)| <= (1 - t/2) |r(u)|``.
    """
    u = np.array(start, dtype=float)
    r = residual(u)
    rn = float(np.linalg.norm(r))
    rep = NewtonReport(residuals=[rn])
    while rn > cfg.tol_residual:
        if rep.iterations >= cfg.max_iter:
            raise NewtonDivergence(
                f"Newton did not converge in {cfg.max_iter} iterations (|r| = {rn:.3e})", rep)
        du = spla.spsolve(jacobian(u).tocsc(), -r)
        if not np.all(np.isfinite(du)):
            raise NewtonDivergence("singular Newton system", rep, reason="singular")
        t = 1.0
        for k in range(cfg.max_backtracks + 1):
            trial = u + t * du
            r_trial = residual(trial)
            rn_trial = float(np.linalg.norm(r_trial))
            if rn_trial <= (1 - 0.5 * t) * rn:
                break
            t *= cfg.damping
        else:
            raise NewtonDivergence(
                f"backtracking exhausted after {cfg.max_backtracks} reductions (|r| = {rn:.3e})", rep,
                reason="backtracking")
        u, r, rn = trial, r_trial, rn_trial
        rep.iterations += 1
        rep.residuals.append(rn)
        rep.backtracks.append(k)
    return u, rep


# Jacobian regularizations tried, in order, when backtracking stalls at a
# degenerate state (alpha and g both flat at zero for p, r > 2)
_EPS_ESCALATION = (1e-6, 1e-3, 1e-1)


def regularized_newton(residual, jacobian, start, cfg: NewtonConfig):
    """Newton with the configured eps_reg, escalated only if backtracking is exhausted.

    The residual is never regularized, so any accepted solution solves the
    exact discrete problem.
    """
    levels = [cfg.eps_reg] + [e for e in _EPS_ESCALATION if e > cfg.eps_reg]
    for k, eps in enumerate(levels):
        try:
            u, rep = newton_iterate(residual, lambda u: jacobian(u, eps), start,
                                    replace(cfg, eps_reg=eps))
        except NewtonDivergence as exc:
            if exc.reason != "backtracking" or k == len(levels) - 1:
                raise
            continue
        rep.eps_reg = eps
        return u, rep
    raise AssertionError("unreachable")


@dataclass(frozen=True, eq=False)
class SubdomainProblem:
    """Nonlinear problem on subdomain ``side`` with Dirichlet or Robin interface data."""

    dec: Decomposition
    side: int
    ps: PStructure
    f: Source
    mode: str
    eta: np.ndarray | None = None
    s: float | None = None
    chi: np.ndarray | None = None
    quad: Quadrature | None = None

    def __post_init__(self):
        if self.side not in (1, 2):
            raise ValueError("side must be 1 or 2")
        n = self.dec.num_interface
        if self.mode == "dirichlet":
            if self.eta is None or np.shape(self.eta) != (n,):
                raise ValueError(f"dirichlet data must have {n} interface values")
        elif self.mode == "robin":
            if self.s is None or not self.s >= 0:
                raise ValueError("Robin parameter s must be nonnegative")
            if self.chi is None or np.shape(self.chi) != (n,):
                raise ValueError(f"Robin datum must have {n} interface values")
        else:
            raise ValueError(f"unknown boundary mode {self.mode!r}")

    @classmethod
    def dirichlet(cls, dec, side, ps, f, eta, quad=None):
        return cls(dec, side, ps, f, "dirichlet", eta=np.asarray(eta, float), quad=quad)

    @classmethod
    def robin(cls, dec, side, ps, f, s, chi, quad=None):
        return cls(dec, side, ps, f, "robin", s=float(s), chi=np.asarray(chi, float), quad=quad)

    @property
    def mesh(self):
        return self.dec.sub(self.side)

    @property
    def iface(self) -> np.ndarray:
        return self.dec.iface_local[self.side - 1]


def interface_flux(dec: Decomposition, i: int, ps: PStructure, f: Source, u: np.ndarray,
                   quad: Quadrature | None = None) -> np.ndarray:
    """Unconstrained residual of ``u`` at the interface rows of subdomain ``i``.

    Entry k is ``a_i(u, R_i mu_k) - (f_i, R_i mu_k)``; for ``u`` solving the
    interior equations this is the discrete Steklov-Poincare image of its trace.
    """
    r = fem.residual_vector(ps, dec.sub(i), u, f, quad)
    return r[dec.iface_local[i - 1]]


def solve_dirichlet(prob: SubdomainProblem, cfg: NewtonConfig,
                    warm_start: np.ndarray | None = None) -> tuple[np.ndarray, NewtonReport]:
    """Discrete Dirichlet solution operator: trace pinned to ``prob.eta``."""
    if prob.mode != "dirichlet":
        raise ValueError("solve_dirichlet needs a dirichlet-mode problem")
    mesh, iface = prob.mesh, prob.iface
    fixed = mesh.tags != 0  # dirichlet and interface dofs
    u0 = np.zeros(mesh.num_vertices) if warm_start is None else np.array(warm_start, float)
    u0[mesh.tags == DIRICHLET] = 0.0
    u0[iface] = prob.eta

    def residual(u):
        r = fem.residual_vector(prob.ps, mesh, u, prob.f, prob.quad)
        r[fixed] = 0.0
        return r

    def jacobian(u, eps):
        J = fem.jacobian_matrix(prob.ps, mesh, u, prob.quad, eps)
        return fem.constrain(J, fixed)

    return regularized_newton(residual, jacobian, u0, cfg)


def _solve_free_interface(prob: SubdomainProblem, cfg: NewtonConfig, warm_start):
    mesh, iface = prob.mesh, prob.iface
    fixed = mesh.tags == DIRICHLET
    M = fem.interface_mass(prob.dec, prob.quad)
    s = prob.s
    rhs = np.zeros(mesh.num_vertices)
    rhs[iface] = prob.chi
    Mext = sp.csr_matrix((mesh.num_vertices, mesh.num_vertices))
    if s:
        Mloc = sp.coo_matrix(s * M)
        Mext = sp.csr_matrix(
            (Mloc.data, (iface[Mloc.row], iface[Mloc.col])),
            shape=(mesh.num_vertices, mesh.num_vertices),
        )
    u0 = np.zeros(mesh.num_vertices) if warm_start is None else np.array(warm_start, float)
    u0[fixed] = 0.0

    def residual(u):
        r = fem.residual_vector(prob.ps, mesh, u, prob.f, prob.quad) + Mext @ u - rhs
        r[fixed] = 0.0
        return r

    def jacobian(u, eps):
        J = fem.jacobian_matrix(prob.ps, mesh, u, prob.quad, eps) + Mext
        return fem.constrain(J, fixed)

    return regularized_newton(residual, jacobian, u0, cfg)


def solve_robin(prob: SubdomainProblem, cfg: NewtonConfig,
                warm_start: np.ndarray | None = None) -> tuple[np.ndarray, NewtonReport]:
    """Find u with a_i(u, v) + s (T u, T v)_Gamma = (f_i, v) + <chi, T v> for all v.

    Interface dofs are unknowns; only dirichlet dofs are held at zero.
    """
    if prob.mode != "robin":
        raise ValueError("solve_robin needs a robin-mode problem")
    if not prob.s > 0:
        raise ValueError("Robin parameter s must be positive")
    return _solve_free_interface(prob, cfg, warm_start)


def solve_neumann(dec: Decomposition, i: int, ps: PStructure, f: Source, cfg: NewtonConfig,
                  quad: Quadrature | None = None, warm_start=None):
    """Subdomain solve with a natural condition on the interface, <S_i eta, mu> = 0.

    Well posed because g is strictly monotone and coercive.
    """
    prob = SubdomainProblem(dec, i, ps, f, "robin", s=0.0,
                            chi=np.zeros(dec.num_interface), quad=quad)
    return _solve_free_interface(prob, cfg, warm_start)

