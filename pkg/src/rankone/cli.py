"""``rankone`` command line: build families, run censuses, Markov diagnostics.

Exit codes: 0 all checks pass, 1 a checked assertion failed, 2 invalid input
or a resource budget was exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from rankone import descendants as dsc
from rankone import markov as mk
from rankone.errors import BudgetExceeded, SpecViolation, StagesExhausted
from rankone.heights import build_family, gamma_rule, spec_from_json, spec_to_json
from rankone.parallel import default_threads
from rankone.tower import build_columns

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    action: Optional[str] = None
    spec_path: Optional[str] = None
    gamma: Optional[str] = None
    stages: Optional[int] = None
    i: int = 0
    jmax: Optional[int] = None
    b: int = 1
    n: int = 1
    alphas: tuple[int, ...] = ()
    bs: tuple[int, ...] = ()
    method: str = "enumerate"
    samples: int = 10_000
    epsilon: float = 0.5
    radius: Optional[int] = None
    steps: int = 1000
    fold: int = 2
    squared: bool = False
    mc_paths: int = 0
    out: Optional[str] = None
    fmt: str = "json"
    pair_budget: int = dsc.DEFAULT_PAIR_BUDGET
    tuple_budget: int = dsc.DEFAULT_TUPLE_BUDGET
    threads: int = field(default_factory=default_threads)
    seed: int = 0
    timing: bool = False

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        kw = {k: v for k, v in vars(ns).items() if k in cls.__dataclass_fields__ and v is not None}
        for key in ("alphas", "bs"):
            if key in kw:
                kw[key] = _int_list(kw[key], key)
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.threads < 1:
            raise UsageError("--threads must be positive")
        if self.command == "markov" and not 0 <= self.epsilon < 1:
            raise UsageError("--epsilon must lie in [0, 1)")
        if self.command == "certify":
            if self.i < 0:
                raise UsageError("--i must be nonnegative")
            if self.action == "general" and (not self.alphas or len(self.alphas) != len(self.bs)):
                raise UsageError("general needs --alphas and --bs of equal length")


def _int_list(text: str, name: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"--{name} must be a comma-separated list of integers") from None


# output ------------------------------------------------------------------------


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt_float(x: float) -> str:
    return repr(float(x))


# build -------------------------------------------------------------------------


def _build_spec(cfg: RunConfig):
    if cfg.gamma is None or cfg.stages is None:
        raise UsageError("need --gamma and --stages")
    if cfg.stages < 0:
        raise UsageError("--stages must be nonnegative")
    try:
        return build_family(gamma_rule(cfg.gamma, cfg.stages))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_spec(cfg: RunConfig):
    if cfg.spec_path is None:
        return _build_spec(cfg)
    try:
        with open(cfg.spec_path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read spec {cfg.spec_path}: {exc}") from None
    return spec_from_json(doc)


def cmd_build(cfg: RunConfig) -> int:
    spec = _build_spec(cfg)
    header = ["k", "gamma", "M", "r", "h_digits", "product"]
    rows = []
    prod = Fraction(1)
    for k, h in enumerate(spec.height_sets):
        prod *= 1 - Fraction(1, 4 * h.gamma)
        rows.append(
            [k, h.gamma, h.M, len(h), len(str(spec.column_heights[k + 1])), f"{prod} ~ {float(prod):.6f}"]
        )
    table = _csv_text(header, rows)
    _emit(cfg, _json_text(spec_to_json(spec)))
    # keep stdout machine-readable when the JSON document goes there
    (sys.stdout if cfg.out else sys.stderr).write(table)
    return EXIT_OK


# certify -------------------------------------------------------------------------


def _certify_one(cfg: RunConfig, spec, j: int) -> dsc.CertificateReport:
    common = dict(threads=cfg.threads)
    name = cfg.action
    if cfg.method == "sampled":
        if name not in ("txt", "u-obstruction"):
            raise UsageError(f"sampled mode is not available for {name}")
        return dsc.sampled_census(spec, cfg.i, j, name, cfg.samples, b=cfg.b, seed=cfg.seed)
    if name == "txt":
        return dsc.certify_txt(spec, cfg.i, j, cfg.b, method=cfg.method, pair_budget=cfg.pair_budget, **common)
    if name == "u-obstruction":
        return dsc.certify_u_obstruction(spec, cfg.i, j, method=cfg.method, pair_budget=cfg.pair_budget, **common)
    if cfg.method != "enumerate":
        raise UsageError(f"{name} supports only --method enumerate")
    if name == "inverse-conservative":
        return dsc.certify_conservative_inverse(spec, cfg.i, j, cfg.n, pair_budget=cfg.pair_budget, **common)
    return dsc.certify_general_product(
        spec, cfg.i, j, cfg.alphas, cfg.bs, tuple_budget=cfg.tuple_budget, **common
    )


def cmd_certify(cfg: RunConfig) -> int:
    spec = _load_spec(cfg)
    jmax = spec.stages if cfg.jmax is None else cfg.jmax
    if not cfg.i < jmax <= spec.stages:
        raise UsageError(f"need i < jmax <= {spec.stages} (got i={cfg.i}, jmax={jmax})")
    reports = []
    status = EXIT_OK
    tripped = None
    for j in range(cfg.i + 1, jmax + 1):
        try:
            rep = _certify_one(cfg, spec, j)
        except BudgetExceeded as exc:
            tripped = (j, str(exc))
            status = EXIT_INVALID
            break
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if not cfg.timing:
            rep.elapsed_ms = None
        reports.append(rep)
        if not rep.bound_holds and not rep.estimate:
            status = max(status, EXIT_FAIL)
    if cfg.fmt == "csv":
        text = _csv_text(dsc.CSV_COLUMNS, [r.csv_row() for r in reports])
    else:
        doc = {
            "certificate": cfg.action,
            "i": cfg.i,
            "jmax": jmax,
            "rows": [r.to_json() for r in reports],
            "all_bounds_hold": all(r.bound_holds for r in reports),
        }
        if tripped:
            doc["budget_exceeded"] = {"j": tripped[0], "message": tripped[1]}
        text = _json_text(doc)
    _emit(cfg, text)
    if tripped:
        sys.stderr.write(f"budget exceeded at j={tripped[0]}: {tripped[1]}\n")
    return status


# markov --------------------------------------------------------------------------


def _chain(cfg: RunConfig, default_radius: int, squared: Optional[bool] = None) -> mk.MarkovChainSpec:
    R = default_radius if cfg.radius is None else cfg.radius
    try:
        return mk.MarkovChainSpec(cfg.epsilon, R, cfg.squared if squared is None else squared)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _markov_stationary(cfg: RunConfig) -> int:
    spec = _chain(cfg, 500)
    lam = mk.stationary(spec)
    expected = 1 / (1 + spec.epsilon)
    rel = abs(lam[1] - expected) / expected
    resid = mk.stationary_residual(spec, lam)
    ok = rel < 1e-12 and resid < 1e-10
    if cfg.fmt == "csv":
        rows = [[i, _fmt_float(lam[i])] for i in range(spec.radius + 1)]
        text = _csv_text(["i", "lambda_i"], rows)
    else:
        text = _json_text(
            {
                "epsilon": spec.epsilon,
                "radius": spec.radius,
                "lambda_1": lam[1],
                "lambda_1_expected": expected,
                "lambda_1_rel_error": rel,
                "interior_residual": resid,
                "window_sum": lam.partial_sum(),
                "passed": ok,
                "lambda": [lam[i] for i in range(spec.radius + 1)],
            }
        )
    _emit(cfg, text)
    return EXIT_OK if ok else EXIT_FAIL


def _markov_reversible(cfg: RunConfig) -> int:
    spec = _chain(cfg, 200)
    lam = mk.stationary(spec)
    rep = mk.check_reversible(mk.kernel_matrix(spec), lam)
    doc = {
        "epsilon": spec.epsilon,
        "radius": spec.radius,
        "kernel": "P*P" if spec.squared else "P",
        "max_abs_defect": rep.max_abs,
        "max_rel_defect": rep.max_rel,
        "worst_pair": list(rep.worst),
        "tolerance": rep.tolerance,
        "passed": rep.passed,
    }
    if cfg.fmt == "csv":
        text = _csv_text(list(doc), [[_fmt_float(v) if isinstance(v, float) else v for v in doc.values()]])
    else:
        text = _json_text(doc)
    _emit(cfg, text)
    return EXIT_OK if rep.passed else EXIT_FAIL


MC_CHECKPOINTS = (10, 100, 1000)


def _markov_returns(cfg: RunConfig) -> int:
    spec = _chain(cfg, cfg.steps + 10, squared=False)
    try:
        series = mk.return_probabilities(spec, cfg.steps)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    p, ps = series.p00, series.partial_sums
    header = ["n", "p00_n", "partial_sum"]
    cols = [p, ps]
    status = EXIT_OK
    checks = []
    if cfg.mc_paths:
        hits, lost = mk.monte_carlo_returns(spec, cfg.steps, cfg.mc_paths, cfg.seed, cfg.threads)
        est = hits / cfg.mc_paths
        se = mk.standard_error(p, cfg.mc_paths)
        header += ["mc_p00_n", "mc_se"]
        cols += [est, se]
        for n in MC_CHECKPOINTS:
            if n <= cfg.steps:
                z = abs(est[n - 1] - p[n - 1])
                ok = bool(z <= 3 * se[n - 1]) if se[n - 1] > 0 else bool(z == 0)
                checks.append({"n": n, "exact": p[n - 1], "mc": est[n - 1], "se": se[n - 1], "within_3se": ok})
                if not ok:
                    status = EXIT_FAIL
    if cfg.fmt == "csv":
        rows = [[n + 1] + [_fmt_float(c[n]) for c in cols] for n in range(cfg.steps)]
        text = _csv_text(header, rows)
    else:
        doc = {
            "epsilon": spec.epsilon,
            "radius": spec.radius,
            "steps": cfg.steps,
            "leaked_mass": series.leaked_mass,
            "partial_sum": float(ps[-1]),
            "p00": [float(x) for x in p],
        }
        if cfg.mc_paths:
            doc.update(mc_paths=cfg.mc_paths, seed=cfg.seed, mc_checks=checks)
        text = _json_text(doc)
    _emit(cfg, text)
    return status


def _markov_product(cfg: RunConfig) -> int:
    spec = _chain(cfg, 2 * cfg.steps + 10, squared=True)
    try:
        rep = mk.product_conservativity_diagnostic(spec, cfg.fold, cfg.steps)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if cfg.fmt == "csv":
        q = rep.q00
        qk = q**rep.fold
        rows = [
            [n + 1, _fmt_float(q[n]), _fmt_float(s), _fmt_float(qk[n]), _fmt_float(sk)]
            for n, (s, sk) in enumerate(zip(np.cumsum(q), np.cumsum(qk)))
        ]
        text = _csv_text(["n", "q00_n", "partial_sum_q", "q00_n_pow_k", "partial_sum_qk"], rows)
    else:
        text = _json_text(rep.to_json())
    _emit(cfg, text)
    return EXIT_OK


def cmd_markov(cfg: RunConfig) -> int:
    return {
        "stationary": _markov_stationary,
        "reversible": _markov_reversible,
        "returns": _markov_returns,
        "product-diagnostic": _markov_product,
    }[cfg.action](cfg)


# crosscheck ------------------------------------------------------------------------


def cmd_crosscheck(cfg: RunConfig) -> int:
    spec = _load_spec(cfg)
    rows = []
    status = EXIT_OK
    for col in build_columns(spec):
        direct = dsc.descendant_table(spec, 0, col.stage).values
        ok = tuple(direct) == col.descendant_heights and col.height == spec.column_heights[col.stage]
        first = None
        if not ok:
            status = EXIT_FAIL
            first = next(
                (x for x, y in zip(col.descendant_heights, direct) if x != y),
                "length mismatch",
            )
        rows.append([col.stage, col.height, col.descendant_count, "ok" if ok else f"mismatch:{first}"])
        if not ok:
            sys.stderr.write(f"stage {col.stage}: first differing height {first}\n")
            break
    if cfg.fmt == "csv":
        text = _csv_text(["stage", "height", "descendant_count", "status"], rows)
    else:
        text = _json_text(
            {
                "stages": [
                    {"stage": s, "height": str(h), "descendant_count": c, "status": st}
                    for s, h, c, st in rows
                ],
                "passed": status == EXIT_OK,
            }
        )
    _emit(cfg, text)
    return status


# parser ------------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0)


def _spec_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", dest="spec_path", help="spec JSON written by `build`")
    p.add_argument("--gamma", help="build in place: 2,5,17 | constant:c | linear | powers-of-two")
    p.add_argument("--stages", type=int)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rankone", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a rank-one family and write its spec JSON")
    b.add_argument("--gamma", required=True)
    b.add_argument("--stages", type=int, required=True)
    _common(b)

    c = sub.add_parser("certify", help="run a descendant census for j = i+1..jmax")
    c.add_argument("action", choices=("txt", "u-obstruction", "inverse-conservative", "general"))
    _spec_source(c)
    c.add_argument("--i", type=int, default=0)
    c.add_argument("--jmax", type=int)
    c.add_argument("--b", type=int, default=1)
    c.add_argument("--n", type=int, default=1)
    c.add_argument("--alphas")
    c.add_argument("--bs")
    c.add_argument("--method", choices=("enumerate", "stagewise", "sampled"), default="enumerate")
    c.add_argument("--samples", type=int, default=10_000)
    c.add_argument("--pair-budget", type=int, default=dsc.DEFAULT_PAIR_BUDGET)
    c.add_argument("--tuple-budget", type=int, default=dsc.DEFAULT_TUPLE_BUDGET)
    c.add_argument("--threads", type=int, default=default_threads())
    c.add_argument("--timing", action="store_true", help="include wall-clock times (not reproducible)")
    _common(c)

    m = sub.add_parser("markov", help="Kakutani-Parry chain diagnostics")
    m.add_argument("action", choices=("stationary", "reversible", "returns", "product-diagnostic"))
    m.add_argument("--epsilon", type=float, default=0.5)
    m.add_argument("--radius", type=int)
    m.add_argument("--squared", action="store_true", help="use P*P (reversible)")
    m.add_argument("--steps", type=int, default=1000)
    m.add_argument("--fold", type=int, default=2)
    m.add_argument("--mc-paths", type=int, default=0, help="returns: add a Monte Carlo cross-check")
    m.add_argument("--threads", type=int, default=default_threads())
    _common(m)

    x = sub.add_parser("crosscheck", help="compare column stacking with direct sums")
    _spec_source(x)
    _common(x)
    return ap


COMMANDS = {"build": cmd_build, "certify": cmd_certify, "markov": cmd_markov, "crosscheck": cmd_crosscheck}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    try:
        cfg = RunConfig.from_args(ns)
        return COMMANDS[cfg.command](cfg)
    except (UsageError, SpecViolation, StagesExhausted, BudgetExceeded) as exc:
        sys.stderr.write(f"rankone: {type(exc).__name__}: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
