"""Experiment pipeline: mesh -> decomposition -> global reference -> Robin-Robin -> certificates."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from . import fem, interface, mesh as meshmod, monolithic
from .config import (EXIT_CERT, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, ConfigError,
                     ExperimentConfig, load_config)
from .expr import parse_expression
from .problems import get_manufactured
from .pstructure import certify_p_structure, get_preset
from .subsolver import NewtonDivergence

log = logging.getLogger(__name__)
OUTPUT_ROOT_ENV = "ROBIN_DD_OUTPUT_ROOT"


@dataclass
class Setup:
    cfg: ExperimentConfig
    mesh: meshmod.Mesh
    dec: meshmod.Decomposition
    ps: object
    f: object
    exact: object = None


def build_setup(cfg: ExperimentConfig) -> Setup:
    me, pr = cfg.mesh, cfg.problem
    try:
        if me.d == 1:
            mesh = meshmod.build_interval_mesh(*me.extents, me.n[0])
        else:
            mesh = meshmod.build_rect_mesh(*me.extents, *me.n)
        dec = meshmod.decompose(mesh, me.axis, me.cut)
        ps = get_preset(pr.preset, pr.p, pr.lam)
        ps.check_dimension(me.d)
        exact = None
        if pr.source.startswith("mms:"):
            mms = get_manufactured(pr.source[4:])
            if (mms.preset, mms.p, mms.lam, mms.dim) != (pr.preset, pr.p, pr.lam, me.d):
                raise ConfigError(
                    f"manufactured solution {pr.source} requires preset={mms.preset}, "
                    f"p={mms.p}, lambda={mms.lam}, d={mms.dim}")
            f, exact = mms.f(), mms.exact()
        else:
            f = parse_expression(pr.source)
            f(mesh.points)  # reject y on 1D meshes early
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err)) from err
    return Setup(cfg, mesh, dec, ps, f, exact)


def initial_trace(setup: Setup, ref: interface.Reference) -> np.ndarray:
    m = setup.cfg.method
    n = setup.dec.num_interface
    if m.eta0 == "zero":
        return np.zeros(n)
    if m.eta0 == "reference":
        return ref.eta.copy()
    if m.eta0 == "random":
        return np.random.default_rng(m.seed).uniform(-0.1, 0.1, n)
    return interface.neumann_start(setup.dec, setup.ps, setup.f, setup.cfg.newton)


@dataclass
class ExperimentResult:
    exit_code: int
    history: diag.ConvergenceHistory | None = None
    certificates: list[diag.CertResult] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    message: str = ""


def resolve_output_dir(cfg: ExperimentConfig, override: str | None = None) -> Path:
    out = Path(override or cfg.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def run_experiment(cfg: ExperimentConfig, outdir: Path, echo=print) -> ExperimentResult:
    """Execute the full pipeline and write ``history.csv`` and ``summary.json`` into ``outdir``."""
    setup = build_setup(cfg)
    dec, ps, f, newton = setup.dec, setup.ps, setup.f, cfg.newton
    outdir.mkdir(parents=True, exist_ok=True)
    stage = "p-structure certification"
    try:
        pcert = certify_p_structure(ps, 10_000, cfg.method.seed, dim=cfg.mesh.d, strict=False)
        stage = "global reference solve"
        u_glob, grep = monolithic.solve_global(setup.mesh, ps, f, newton)
        ref = interface.reference_from_global(dec, ps, f, u_glob)
        stage = "initial trace"
        eta0 = initial_trace(setup, ref)
        stage = "Robin-Robin iteration"
        hist = interface.run(
            dec, ps, f, cfg.method.s, eta0,
            interface.StopCriteria(cfg.method.tol_gap, cfg.method.max_outer),
            newton, ref, method=cfg.method.method,
            strict_recompute=cfg.method.strict_recompute,
            metadata={"config": cfg.name, "seed": cfg.method.seed, "eta0": cfg.method.eta0,
                      "source": cfg.problem.source, "lambda": cfg.problem.lam,
                      "n": list(cfg.mesh.n), "d": cfg.mesh.d},
        )
    except NewtonDivergence as err:
        msg = f"stage '{stage}' failed: {err}"
        echo(msg)
        return ExperimentResult(EXIT_DIVERGED, message=msg)

    state = hist.final_state
    tol = 10 * newton.tol_residual
    # gluing averages the two traces, which perturbs the rows next to the
    # interface by roughly (stiffness ~ 1/h) * gap / 2
    final_gap = hist.records[-1].gap
    converse_tol = tol + cfg.method.converse_factor * final_gap / hist.metadata["h"]
    trans = monolithic.check_transmission(dec, ps, f, u_glob, newton,
                                          pair=(state.u1, state.u2), converse_tol=converse_tol)
    certs = [
        diag.CertResult("p_structure", pcert.passed, None, pcert.as_dict()),
        diag.CertResult("transmission", trans.passed, None, trans.as_dict()),
        diag.contraction_certificate(hist),
        diag.monotone_gap_certificate(hist, cfg.method.pairing_tol),
    ]
    extra = {
        "error_decay": diag.error_decay_summary(hist),
        "global_newton": grep.as_dict(),
    }
    if setup.exact is not None:
        uex = setup.exact(setup.mesh.points)
        uex[setup.mesh.dirichlet_mask()] = 0.0
        extra["discretization_error_w1p"] = fem.norm_w1p(setup.mesh, u_glob - uex, ps)
    diag.write_history_csv(hist, outdir / "history.csv")
    diag.write_summary(outdir / "summary.json", hist, certs, extra)

    echo(f"{cfg.name}: {'converged' if hist.converged else 'NOT converged'} after "
         f"{hist.iterations} iterations (gap {hist.records[-1].gap:.3e})")
    for c in certs:
        echo(c.line())
    if not hist.converged:
        code = EXIT_DIVERGED
    elif not all(c.passed for c in certs):
        code = EXIT_CERT
    else:
        code = EXIT_OK
    return ExperimentResult(code, hist, certs, diag.summary_dict(hist, certs, extra))


def _sweep_point(args):
    config_path, axis, value, outdir = args
    try:
        cfg = load_config(config_path).with_value(axis, value).validate()
        res = run_experiment(cfg, Path(outdir), echo=lambda *_: None)
    except ConfigError as err:
        return value, EXIT_USAGE, False, 0, float("nan"), str(err)
    hist = res.history
    if hist is None:
        return value, res.exit_code, False, 0, float("nan"), res.message
    return value, res.exit_code, hist.converged, hist.iterations, hist.records[-1].gap, ""


def run_sweep(config_path, axis: str, values: list, outdir: Path,
              workers: int | None = None, echo=print) -> int:
    """Run one experiment per value in parallel; write ``aggregate.csv`` in ``outdir``."""
    if not values:
        echo("sweep needs at least one value")
        return EXIT_USAGE
    base = load_config(config_path)
    for v in values:
        base.with_value(axis, v)
    outdir.mkdir(parents=True, exist_ok=True)
    jobs = [(str(config_path), axis, v, str(outdir / f"{axis}={v}")) for v in values]
    with ProcessPoolExecutor(max_workers=workers or min(len(jobs), os.cpu_count() or 1)) as pool:
        rows = list(pool.map(_sweep_point, jobs))
    with open(outdir / "aggregate.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "value", "exit_code", "converged", "iterations", "final_gap"])
        for value, code, conv, its, gap, _ in rows:
            w.writerow([axis, value, code, int(conv), its, repr(float(gap))])
    for value, code, conv, its, gap, msg in rows:
        echo(f"{axis}={value}: exit {code}, iterations {its}, final gap {gap:.3e}" + (f" ({msg})" if msg else ""))
    return max(code for _, code, *_ in rows)
