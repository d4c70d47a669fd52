"""Experiment configuration files.

INI-style sections::

    [problem]  preset, p, r, lambda, source
    [mesh]     d, extents, n, axis, cut
    [method]   s, tol_gap, max_outer, eta0, seed, method, strict_recompute,
               pairing_tol, converse_factor
    [newton]   tol, max_iter, eps_reg, damping, max_backtracks
    [output]   dir

``r`` is optional; every preset fixes it (2 for linear and resolvent, p for
reaction) and a conflicting value is rejected.  ``source`` is either an expression in x, y (see :mod:`robin_dd.expr`) or
``mms:<id>`` naming a manufactured solution.  ``eta0`` is one of
``neumann`` (solve <S_2 eta, mu> = 0), ``zero``, ``reference`` (trace of
the global solution) or ``random`` (uniform in [-0.1, 0.1], seeded).
``converse_factor`` scales the allowance ``final_gap / h`` added to the
glued-residual tolerance of the converse transmission check.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .subsolver import NewtonConfig

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_CERT = 0, 1, 2, 3
ETA0_MODES = ("neumann", "zero", "reference", "random")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemConfig:
    preset: str = "linear"
    p: float = 2.0
    lam: float = 1.0
    source: str = "1"
    r: float | None = None

    def preset_r(self) -> float:
        return self.p if self.preset == "reaction" else 2.0


@dataclass(frozen=True)
class MeshConfig:
    d: int = 1
    extents: tuple[float, ...] = (0.0, 1.0)
    n: tuple[int, ...] = (32,)
    axis: str = "x"
    cut: float = 0.5


@dataclass(frozen=True)
class MethodConfig:
    s: float = 1.0
    tol_gap: float = 1e-6
    max_outer: int = 200
    eta0: str = "neumann"
    seed: int = 0
    method: str = "robin"
    strict_recompute: bool = False
    pairing_tol: float = 1e-6
    converse_factor: float = 10.0


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    method: MethodConfig = field(default_factory=MethodConfig)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    output_dir: str = "out"
    name: str = "experiment"

    def validate(self) -> "ExperimentConfig":
        m, me, pr = self.method, self.mesh, self.problem
        if not m.s > 0:
            raise ConfigError(f"[method] s must be positive (got {m.s})")
        if not m.tol_gap > 0 or m.max_outer < 1:
            raise ConfigError("[method] needs tol_gap > 0 and max_outer >= 1")
        if m.eta0 not in ETA0_MODES:
            raise ConfigError(f"[method] eta0 must be one of {ETA0_MODES}")
        if m.method not in ("robin", "pr"):
            raise ConfigError("[method] method must be 'robin' or 'pr'")
        if me.d not in (1, 2):
            raise ConfigError("[mesh] d must be 1 or 2")
        if len(me.extents) != 2 or len(me.n) != me.d:
            raise ConfigError("[mesh] extents needs 2 numbers and n needs d integers")
        if me.d == 1 and me.axis != "x":
            raise ConfigError("[mesh] axis must be x in 1D")
        if pr.p < 2:
            raise ConfigError("[problem] p must be >= 2")
        if pr.preset == "linear" and pr.p != 2:
            raise ConfigError("[problem] the linear preset requires p = 2")
        if pr.lam <= 0:
            raise ConfigError("[problem] lambda must be positive")
        if pr.r is not None and pr.r != pr.preset_r():
            raise ConfigError(f"[problem] preset {pr.preset} has r = {pr.preset_r():g}, got r = {pr.r:g}")
        return self

    def with_value(self, axis: str, value) -> "ExperimentConfig":
        """Copy with one sweep axis (s, p or h) set; for h the value is the element count."""
        if axis == "s":
            return replace(self, method=replace(self.method, s=float(value)))
        if axis == "p":
            # r follows p through the preset, so an explicit r is dropped
            return replace(self, problem=replace(self.problem, p=float(value), r=None))
        if axis == "h":
            n = int(value)
            return replace(self, mesh=replace(self.mesh, n=(n,) * self.mesh.d))
        raise ConfigError(f"unknown sweep axis {axis!r}; use s, p or h")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


def parse_config(text: str, name: str = "experiment") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
        pr = cp["problem"] if cp.has_section("problem") else {}
        me = cp["mesh"] if cp.has_section("mesh") else {}
        mt = cp["method"] if cp.has_section("method") else {}
        nw = cp["newton"] if cp.has_section("newton") else {}
        out = cp["output"] if cp.has_section("output") else {}
        preset = pr.get("preset", "linear")
        problem = ProblemConfig(
            preset=preset,
            p=float(pr.get("p", 2.0)),
            lam=float(pr.get("lambda", 1.0)),
            source=pr.get("source", "1"),
            r=float(pr["r"]) if "r" in pr else None,
        )
        d = int(me.get("d", 1))
        mesh = MeshConfig(
            d=d,
            extents=_floats(me.get("extents", "0 1" if d == 1 else "1 1")),
            n=_ints(me.get("n", "32" if d == 1 else "16 16")),
            axis=me.get("axis", "x"),
            cut=float(me.get("cut", 0.5)),
        )
        method = MethodConfig(
            s=float(mt.get("s", 1.0)),
            tol_gap=float(mt.get("tol_gap", 1e-6)),
            max_outer=int(mt.get("max_outer", 200)),
            eta0=mt.get("eta0", "neumann"),
            seed=int(mt.get("seed", 0)),
            method=mt.get("method", "robin"),
            strict_recompute=cp.getboolean("method", "strict_recompute", fallback=False),
            pairing_tol=float(mt.get("pairing_tol", 1e-6)),
            converse_factor=float(mt.get("converse_factor", 10.0)),
        )
        defaults = NewtonConfig()
        newton = NewtonConfig(
            tol_residual=float(nw.get("tol", defaults.tol_residual)),
            max_iter=int(nw.get("max_iter", defaults.max_iter)),
            damping=float(nw.get("damping", defaults.damping)),
            max_backtracks=int(nw.get("max_backtracks", defaults.max_backtracks)),
            eps_reg=float(nw.get("eps_reg", defaults.eps_reg)),
        )
        cfg = ExperimentConfig(problem, mesh, method, newton,
                               out.get("dir", f"out/{name}"), name)
    except ConfigError:
        raise
    except (configparser.Error, ValueError, KeyError) as err:
        raise ConfigError(f"invalid config: {err}") from err
    return cfg.validate()


def bundled_configs() -> list[str]:
    root = resources.files("robin_dd") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_config(path_or_name: str | Path) -> ExperimentConfig:
    """Read a config file; a bare name such as ``linear_1d`` selects a bundled config."""
    path = Path(path_or_name)
    if path.is_file():
        return parse_config(path.read_text(), path.stem)
    bundled = resources.files("robin_dd") / "configs" / f"{path_or_name}.ini"
    if bundled.is_file():
        return parse_config(bundled.read_text(), str(path_or_name))
    raise ConfigError(f"no config file {str(path_or_name)!r} (bundled: {', '.join(bundled_configs())})")
