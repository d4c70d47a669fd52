"""Global reference solve and the discrete transmission-problem checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fem
from .fem import Quadrature, Source
from .mesh import Decomposition, Mesh, glue, restrict, trace
from .pstructure import PStructure
from .subsolver import NewtonConfig, NewtonReport, interface_flux, regularized_newton


def solve_global(mesh: Mesh, ps: PStructure, f: Source, cfg: NewtonConfig,
                 quad: Quadrature | None = None,
                 warm_start=None) -> tuple[np.ndarray, NewtonReport]:
    """Damped Newton on the undecomposed mesh with homogeneous dirichlet data."""
    ps.check_dimension(mesh.dim)
    fixed = mesh.dirichlet_mask()
    u0 = np.zeros(mesh.num_vertices) if warm_start is None else np.array(warm_start, float)
    u0[fixed] = 0.0
    return regularized_newton(
        lambda u: fem.assemble_residual(ps, mesh, u, f, quad),
        lambda u, eps: fem.assemble_jacobian(ps, mesh, u, quad, eps),
        u0, cfg,
    )


@dataclass
class EquivalenceReport:
    """Outcome of the transmission checks; violations are listed, never raised."""

    tol: float
    interior_residual: tuple[float, float]
    trace_mismatch: float
    flux_balance: float
    converse_tol: float | None = None
    converse_residual: float | None = None
    violations: list[str] = field(default_factory=list)

    @property
    def forward_passed(self) -> bool:
        return not any(v.startswith(("interior", "trace", "flux")) for v in self.violations)

    @property
    def converse_passed(self) -> bool | None:
        if self.converse_residual is None:
            return None
        return "converse" not in " ".join(self.violations)

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "tol": self.tol, "interior_residual": list(self.interior_residual),
            "trace_mismatch": self.trace_mismatch, "flux_balance": self.flux_balance,
            "converse_tol": self.converse_tol, "converse_residual": self.converse_residual,
            "passed": self.passed, "violations": list(self.violations),
        }


def check_transmission(dec: Decomposition, ps: PStructure, f: Source, u_global,
                       cfg: NewtonConfig, pair: tuple[np.ndarray, np.ndarray] | None = None,
                       tol: float | None = None, converse_tol: float | None = None,
                       quad: Quadrature | None = None) -> EquivalenceReport:
    """Verify that the restrictions of ``u_global`` solve the transmission problem.

    Checks interior residuals on both subdomains, equality of the two
    traces, and the interface flux balance sum_i a_i(u_i, R_i mu_k) - (f_i, R_i mu_k).
    If ``pair`` is given, the two subdomain functions are glued and the
    global residual of the result is checked against ``converse_tol``.
    """
    tol = 10 * cfg.tol_residual if tol is None else tol
    interior, fluxes, traces = [], [], []
    for i in (1, 2):
        sub = dec.sub(i)
        ui = restrict(dec, i, u_global)
        r = fem.residual_vector(ps, sub, ui, f, quad)
        r[sub.tags != 0] = 0.0
        interior.append(float(np.linalg.norm(r)))
        fluxes.append(interface_flux(dec, i, ps, f, ui, quad))
        traces.append(trace(dec, i, ui))
    rep = EquivalenceReport(
        tol, tuple(interior), float(np.max(np.abs(traces[0] - traces[1]))),
        float(np.max(np.abs(fluxes[0] + fluxes[1]))),
    )
    for i, val in enumerate(interior, start=1):
        if val > tol:
            rep.violations.append(f"interior residual on subdomain {i}: {val:.3e} > {tol:.3e}")
    if rep.trace_mismatch != 0.0:
        rep.violations.append(f"trace mismatch {rep.trace_mismatch:.3e}")
    if rep.flux_balance > tol:
        rep.violations.append(f"flux balance {rep.flux_balance:.3e} > {tol:.3e}")
    if pair is not None:
        rep.converse_tol = tol if converse_tol is None else converse_tol
        glued = glue(dec, *pair)
        res = fem.assemble_residual(ps, dec.mesh, glued, f, quad)
        rep.converse_residual = float(np.max(np.abs(res)))
        if rep.converse_residual > rep.converse_tol:
            rep.violations.append(
                f"converse: glued global residual {rep.converse_residual:.3e} > {rep.converse_tol:.3e}")
    return rep
