"""Outer iteration counts of the Robin-Robin method as a function of s.

For each bundled preset config the experiment pipeline is run for a range
of Robin parameters; the table lists iterations, final gap and final
subdomain errors, together with the contraction and pairing verdicts.

    python3 scripts/robin_parameter_study.py [--values 0.25 0.5 1 2 4] [--out out/s_study]
"""

import argparse
from pathlib import Path

from robin_dd import diagnostics as diag
from robin_dd.config import load_config
from robin_dd.experiment import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", nargs="+", default=["linear_1d", "plap4_1d", "plap3_square"])
    ap.add_argument("--values", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--out", default="out/s_study")
    args = ap.parse_args()
    summaries, verdicts = [], []
    for name in args.configs:
        base = load_config(name)
        for s in args.values:
            cfg = base.with_value("s", s)
            res = run_experiment(cfg, Path(args.out) / name / f"s={s:g}", echo=lambda *_: None)
            if res.history is None:
                print(f"{name} s={s:g}: {res.message}")
                continue
            summaries.append(diag.error_decay_summary(res.history))
            verdicts.append(f"exit={res.exit_code} " + " ".join(f"{c.name}={'ok' if c.passed else 'FAIL'}" for c in res.certificates))
    table = diag.format_decay_table(summaries).splitlines()
    print(table[0])
    for row, v in zip(table[1:], verdicts):
        print(f"{row}  {v}")


if __name__ == "__main__":
    main()
