"""Convergence histories, their serialization, and the certificates computed from them.

A history holds one :class:`IterationRecord` per outer iteration ``n >= 1``
plus the ``initial`` quantities belonging to ``n = 0`` (only the second
subdomain exists there).  With a reference solution the records carry

* ``mu_err``     ``|mu^n - mu|``      with ``mu^n = s eta_2^n + S2 eta_2^n``
* ``lambda_err`` ``|lambda^n - lambda|`` with ``lambda^n = s eta_2^n - S2 eta_2^n``
* ``pairing1/2`` ``(S_i eta_i^n - S_i eta, eta_i^n - eta)``

all in the discrete L2(Gamma) geometry.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields

CSV_COLUMNS = ("n", "gap", "err_eta1", "err_eta2", "err_u1", "err_u2",
               "mu_err", "lambda_err", "newton1", "newton2")
SUMMARY_SCHEMA = "robin-dd-summary/1"
NAN = float("nan")


@dataclass
class IterationRecord:
    n: int
    gap: float
    err_eta1: float = NAN
    err_eta2: float = NAN
    err_u1: float = NAN
    err_u2: float = NAN
    mu_err: float = NAN
    lambda_err: float = NAN
    newton1: int = 0
    newton2: int = 0
    pairing1: float = NAN
    pairing2: float = NAN
    flux_balance: float = NAN


@dataclass
class ConvergenceHistory:
    records: list[IterationRecord] = field(default_factory=list)
    initial: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    converged: bool = False
    has_reference: bool = False
    final_state: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        ns = [r.n for r in self.records]
        if ns and ns != list(range(1, len(ns) + 1)):
            raise ValueError("records must be numbered 1, 2, ... without gaps")

    def __len__(self):
        return len(self.records)

    def append(self, rec: IterationRecord) -> None:
        if rec.n != len(self.records) + 1:
            raise ValueError(f"expected record n={len(self.records) + 1}, got {rec.n}")
        self.records.append(rec)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def slack(self) -> float:
        return 10.0 * float(self.metadata.get("newton_tol", 0.0))


class MissingReference(ValueError):
    pass


@dataclass
class CertResult:
    name: str
    passed: bool
    first_violation: int | None = None
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        where = "" if self.first_violation is None else f" (first violation at n={self.first_violation})"
        return f"[{tag}] {self.name}{where}"


def contraction_certificate(hist: ConvergenceHistory, slack: float | None = None) -> CertResult:
    """Check |mu^{n+1} - mu| <= |lambda^n - lambda| <= |mu^n - mu| for every n.

    Also reports the telescoping sum of |mu^n - mu|^2 - |mu^{n+1} - mu|^2,
    which must not exceed |mu^0 - mu|^2.
    """
    if not hist.has_reference or "mu_err" not in hist.initial:
        raise MissingReference("contraction certificate needs reference quantities")
    slack = hist.slack if slack is None else slack
    mu = [hist.initial["mu_err"]] + hist.column("mu_err")
    lam = [hist.initial["lambda_err"]] + hist.column("lambda_err")
    first = None
    worst = -math.inf
    for n in range(len(mu)):
        excess = lam[n] - mu[n]
        if n + 1 < len(mu):
            excess = max(excess, mu[n + 1] - lam[n])
        worst = max(worst, excess)
        if excess > slack and first is None:
            first = n
    tele = sum(mu[n] ** 2 - mu[n + 1] ** 2 for n in range(len(mu) - 1))
    bound = mu[0] ** 2
    tele_ok = tele <= bound + slack
    return CertResult(
        "contraction", first is None and tele_ok, first,
        {"slack": slack, "worst_excess": worst, "telescoping_sum": tele,
         "telescoping_bound": bound, "telescoping_ok": tele_ok},
    )


def monotone_gap_certificate(hist: ConvergenceHistory, final_tol: float = 1e-6,
                             slack: float | None = None) -> CertResult:
    """Pairings (S_i eta_i^n - S_i eta, eta_i^n - eta) are >= -slack and end below ``final_tol``."""
    if not hist.has_reference:
        raise MissingReference("monotone pairing certificate needs reference quantities")
    slack = hist.slack if slack is None else slack
    p1 = hist.column("pairing1")
    p2 = [hist.initial.get("pairing2", NAN)] + hist.column("pairing2")
    first = None
    for n in range(len(p2)):
        vals = [p2[n]] + ([p1[n - 1]] if n >= 1 else [])
        if any(v < -slack for v in vals if not math.isnan(v)):
            first = n
            break
    final = max(p1[-1], p2[-1]) if p1 else p2[-1]
    final_ok = final <= final_tol
    return CertResult(
        "monotone_pairing", first is None and final_ok, first,
        {"slack": slack, "final_pairing": final, "final_tol": final_tol,
         "min_pairing": min([v for v in p1 + p2 if not math.isnan(v)], default=NAN)},
    )


def error_decay_summary(hist: ConvergenceHistory) -> dict:
    """Last-iterate errors and the iteration at which each decade of gap reduction is reached."""
    out = {"iterations": hist.iterations, "converged": hist.converged,
           "s": hist.metadata.get("s"), "preset": hist.metadata.get("preset")}
    if not hist.records:
        return out
    last = hist.records[-1]
    out["final"] = {k: getattr(last, k) for k in
                    ("gap", "err_eta1", "err_eta2", "err_u1", "err_u2")}
    gaps = hist.column("gap")
    decades = []
    if gaps[0] > 0:
        k = 1
        for n, g in enumerate(gaps, start=1):
            while g <= gaps[0] * 10.0 ** (-k):
                decades.append({"decade": k, "iteration": n})
                k += 1
    out["decades"] = decades
    if hist.has_reference:
        tot = [a + b for a, b in zip(hist.column("err_u1"), hist.column("err_u2"))]
        out["err_u_total_monotone"] = all(b <= a for a, b in zip(tot, tot[1:]))
    return out


def format_decay_table(summaries: list[dict]) -> str:
    head = f"{'preset':>10} {'s':>6} {'iters':>6} {'gap':>10} {'err_u1':>10} {'err_u2':>10}"
    rows = [head]
    for sm in summaries:
        fin = sm.get("final", {})
        rows.append(
            f"{str(sm.get('preset')):>10} {sm.get('s', NAN):>6.3g} {sm['iterations']:>6d} "
            f"{fin.get('gap', NAN):>10.3e} {fin.get('err_u1', NAN):>10.3e} {fin.get('err_u2', NAN):>10.3e}"
        )
    return "\n".join(rows)


# ----------------------------------------------------------- serialization


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def write_history_csv(hist: ConvergenceHistory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in hist.records:
            w.writerow([_fmt(getattr(rec, c)) for c in CSV_COLUMNS])


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _json_restore(obj):
    if isinstance(obj, str) and obj in ("nan", "inf", "-inf"):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _json_restore(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_restore(v) for v in obj]
    return obj


def summary_dict(hist: ConvergenceHistory, certificates: list[CertResult] = (),
                 extra: dict | None = None) -> dict:
    doc = {
        "schema": SUMMARY_SCHEMA,
        "metadata": hist.metadata,
        "status": {"converged": hist.converged, "iterations": hist.iterations,
                   "has_reference": hist.has_reference},
        "initial": hist.initial,
        "extra_columns": {
            name: hist.column(name) for name in ("pairing1", "pairing2", "flux_balance")
        },
        "certificates": {c.name: c.as_dict() for c in certificates},
    }
    if extra:
        doc.update(extra)
    return doc


def write_summary(path, hist: ConvergenceHistory, certificates: list[CertResult] = (),
                  extra: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(_json_safe(summary_dict(hist, certificates, extra)), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_history(csv_path, summary_path) -> ConvergenceHistory:
    """Rebuild a history from ``history.csv`` and the summary file."""
    with open(summary_path) as fh:
        doc = _json_restore(json.load(fh))
    if doc.get("schema") != SUMMARY_SCHEMA:
        raise ValueError(f"unrecognized summary schema {doc.get('schema')!r}")
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_COLUMNS:
            raise ValueError(f"unexpected history header {header}")
        rows = list(reader)
    types = {f.name: f.type for f in fields(IterationRecord)}
    extra = doc.get("extra_columns", {})
    records = []
    for k, row in enumerate(rows):
        kw = {c: (int(v) if types[c] == "int" else float(v)) for c, v in zip(CSV_COLUMNS, row)}
        for name, col in extra.items():
            kw[name] = float(col[k])
        records.append(IterationRecord(**kw))
    st = doc["status"]
    return ConvergenceHistory(records, doc.get("initial", {}), doc.get("metadata", {}),
                              st["converged"], st["has_reference"])
