"""Nonlinearities with p-structure.

A :class:`PStructure` bundles the flux nonlinearity ``alpha`` and the
reaction term ``g`` together with their derivatives and the growth,
monotonicity and coercivity constants.  Every callable is vectorized:
``alpha`` maps an array of shape ``(..., d)`` to the same shape,
``alpha_jac(z, eps_reg)`` returns shape ``(..., d, d)``, ``g`` and
``g_deriv(x, eps_reg)`` act elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

CERT_TOL = 1e-12


@dataclass(frozen=True)
class Constants:
    """Constants of the growth (C1, C2) and monotone/coercive (c1..c4) bounds."""

    C1: float
    C2: float
    c1: float
    c2: float
    c3: float
    c4: float

    def __post_init__(self):
        if min(self.C1, self.C2) < 0:
            raise ValueError("growth constants must be nonnegative")
        if min(self.c1, self.c2, self.c3, self.c4) <= 0:
            raise ValueError("monotonicity/coercivity constants must be positive")


@dataclass(frozen=True, eq=False)
class PStructure:
    p: float
    r: float
    alpha: Callable[[np.ndarray], np.ndarray]
    alpha_jac: Callable[[np.ndarray, float], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    g_deriv: Callable[[np.ndarray, float], np.ndarray]
    constants: Constants
    name: str = "custom"
    lam: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.p >= 2:
            raise ValueError(f"p must lie in [2, inf), got {self.p}")
        if not self.r > 1:
            raise ValueError(f"r must lie in (1, inf), got {self.r}")

    def check_dimension(self, d: int) -> None:
        """Raise if (p, r) violate the Sobolev restriction in dimension ``d``."""
        if self.p < d and self.r > d * self.p / (2 * (d - self.p)) + 1:
            raise ValueError(
                f"r={self.r} too large for p={self.p} in dimension {d}"
            )


def _finite(a, what):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite {what}")
    return a


def alpha_eval(ps: PStructure, z) -> np.ndarray:
    return ps.alpha(_finite(z, "gradient"))


def alpha_jacobian(ps: PStructure, z, eps_reg: float = 0.0) -> np.ndarray:
    if eps_reg < 0:
        raise ValueError("eps_reg must be nonnegative")
    return ps.alpha_jac(_finite(z, "gradient"), eps_reg)


def g_eval(ps: PStructure, x):
    return ps.g(_finite(x, "value"))


def g_derivative(ps: PStructure, x, eps_reg: float = 0.0):
    if eps_reg < 0:
        raise ValueError("eps_reg must be nonnegative")
    return ps.g_deriv(_finite(x, "value"), eps_reg)


# ---------------------------------------------------------------- presets


def _power_flux(p):
    def alpha(z):
        z = np.asarray(z, dtype=float)
        if p == 2:
            return z.copy()
        m = np.linalg.norm(z, axis=-1, keepdims=True)
        return m ** (p - 2) * z

    def alpha_jac(z, eps_reg=0.0):
        z = np.asarray(z, dtype=float)
        d = z.shape[-1]
        eye = np.broadcast_to(np.eye(d), z.shape + (d,))
        if p == 2:
            return eye.copy()
        m2 = np.sum(z * z, axis=-1) + eps_reg**2
        m2 = m2[..., None, None]
        outer = z[..., :, None] * z[..., None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            rank1 = np.where(m2 > 0, outer / np.where(m2 > 0, m2, 1.0), 0.0)
        return m2 ** ((p - 2) / 2) * (eye + (p - 2) * rank1)

    return alpha, alpha_jac


def _power_reaction(q, lam):
    """g(x) = lam |x|^{q-2} x."""

    def g(x):
        x = np.asarray(x, dtype=float)
        if q == 2:
            return lam * x
        return lam * np.abs(x) ** (q - 2) * x

    def g_deriv(x, eps_reg=0.0):
        x = np.asarray(x, dtype=float)
        if q == 2:
            return np.full_like(x, lam)
        return lam * (q - 1) * (x * x + eps_reg**2) ** ((q - 2) / 2)

    return g, g_deriv


def p_laplacian(p: float, lam: float = 1.0, r: float = 2.0, name: str = "custom") -> PStructure:
    """alpha(z) = |z|^{p-2} z with reaction g(x) = lam |x|^{r-2} x.

    The stored constants are the sharp ones for this family:
    C1 = 1, c2 = 1, c1 = 2^{2-p}, and for g: C2 = c4 = lam, c3 = lam 2^{2-r}.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    alpha, alpha_jac = _power_flux(p)
    g, g_deriv = _power_reaction(r, lam)
    consts = Constants(
        C1=1.0, C2=lam, c1=2.0 ** (2 - p), c2=1.0, c3=lam * 2.0 ** (2 - r), c4=lam
    )
    return PStructure(
        p=float(p), r=float(r), alpha=alpha, alpha_jac=alpha_jac, g=g,
        g_deriv=g_deriv, constants=consts, name=name, lam=float(lam),
    )


def resolvent(p: float, lam: float = 1.0) -> PStructure:
    """p-Laplacian resolvent: g(x) = lam x, r = 2."""
    return p_laplacian(p, lam, r=2.0, name="resolvent")


def reaction(p: float, lam: float = 1.0) -> PStructure:
    """p-Laplacian reaction-diffusion: g(x) = lam |x|^{p-2} x, r = p."""
    return p_laplacian(p, lam, r=p, name="reaction")


def linear(lam: float = 1.0) -> PStructure:
    return p_laplacian(2.0, lam, r=2.0, name="linear")


PRESETS = {"resolvent": resolvent, "reaction": reaction, "linear": linear}


def get_preset(name: str, p: float = 2.0, lam: float = 1.0) -> PStructure:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if name == "linear":
        if p != 2:
            raise ValueError("the linear preset requires p = 2")
        return linear(lam)
    return PRESETS[name](p, lam)


# ---------------------------------------------------------- certification


@dataclass
class BoundCheck:
    name: str
    worst: float
    constant: float
    kind: str  # "upper": worst <= constant, "lower": worst >= constant
    sample: tuple = ()

    @property
    def margin(self) -> float:
        if self.kind == "upper":
            return self.constant - self.worst
        return self.worst - self.constant

    @property
    def passed(self) -> bool:
        return self.margin >= -CERT_TOL * max(1.0, abs(self.constant))


@dataclass
class CertificationReport:
    preset: str
    p: float
    r: float
    sample_count: int
    seed: int
    checks: list[BoundCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> BoundCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "preset": self.preset, "p": self.p, "r": self.r,
            "sample_count": self.sample_count, "seed": self.seed,
            "passed": self.passed,
            "checks": {
                c.name: {"worst": c.worst, "constant": c.constant,
                         "margin": c.margin, "passed": c.passed}
                for c in self.checks
            },
        }


class PStructureViolation(ValueError):
    def __init__(self, report: CertificationReport, check: BoundCheck):
        super().__init__(
            f"{check.name} bound violated: worst ratio {check.worst:.6g} vs "
            f"constant {check.constant:.6g} at sample {check.sample}"
        )
        self.report = report
        self.check = check


def certify_p_structure(
    ps: PStructure,
    sample_count: int = 10_000,
    seed: int = 0,
    box: float = 5.0,
    dim: int = 2,
    strict: bool = True,
) -> CertificationReport:
    """Sample the p-structure bounds on ``[-box, box]^dim`` and report worst ratios.

    With ``strict`` a violated bound raises :class:`PStructureViolation`
    carrying the offending sample.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.uniform(-box, box, size=(sample_count, dim))
    zt = rng.uniform(-box, box, size=(sample_count, dim))
    x = rng.uniform(-box, box, size=sample_count)
    xt = rng.uniform(-box, box, size=sample_count)
    p, r, k = ps.p, ps.r, ps.constants

    az, azt = ps.alpha(z), ps.alpha(zt)
    gx, gxt = ps.g(x), ps.g(xt)
    nz = np.linalg.norm(z, axis=-1)
    dz = np.linalg.norm(z - zt, axis=-1)
    ax = np.abs(x)

    ratios = {
        "growth_alpha": (np.linalg.norm(az, axis=-1) / nz ** (p - 1), k.C1, "upper", (z,)),
        "growth_g": (np.abs(gx) / ax ** (r - 1), k.C2, "upper", (x,)),
        "monotone_alpha": (np.sum((az - azt) * (z - zt), axis=-1) / dz**p, k.c1, "lower", (z, zt)),
        "coercive_alpha": (np.sum(az * z, axis=-1) / nz**p, k.c2, "lower", (z,)),
        "monotone_g": ((gx - gxt) * (x - xt) / np.abs(x - xt) ** r, k.c3, "lower", (x, xt)),
        "coercive_g": (gx * x / ax**r, k.c4, "lower", (x,)),
    }
    checks = []
    for name, (ratio, const, kind, args) in ratios.items():
        idx = int(np.argmax(ratio) if kind == "upper" else np.argmin(ratio))
        sample = tuple(np.atleast_1d(a[idx]).tolist() for a in args)
        checks.append(BoundCheck(name, float(ratio[idx]), float(const), kind, sample))
    report = CertificationReport(ps.name, p, r, sample_count, seed, checks)
    if strict:
        for c in checks:
            if not c.passed:
                raise PStructureViolation(report, c)
    return report
