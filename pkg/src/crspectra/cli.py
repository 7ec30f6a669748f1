"""crspectra command line.

Exit codes: 0 success, 1 a checked inequality or identity failed, 2 numerical
failure, 3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .balance import BalanceError, NoConvergence, WeightedMeasure, solve_balance
from .geometry import OffSphereError, random_sphere_points, random_unitary
from .moebius import (
    CrAutomorphism,
    cayley_to_siegel,
    cayley_to_sphere,
    compose,
    conjugated_dilation,
    horizontal_energy,
    pullback_residual,
)
from .polynomials import PolynomialParseError
from .quadrature import QuadratureRule, integrate, monte_carlo_rule, product_rule_s3, sphere_volume
from .spectral import Extremal, SpectralError, factor_from_dict, invariant_report

EXIT_OK, EXIT_VIOLATION, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2, 3
FD_THRESHOLD = 1e-6
ALGEBRAIC_THRESHOLD = 1e-10
SPHERE_THRESHOLD = 1e-12
VOLUME_THRESHOLD = 1e-8

VERIFY_COLUMNS = ["factor_id", "lambda1", "volume", "invariant", "bound", "margin"]
CHECK_COLUMNS = ["check", "max_residual", "threshold", "passed", "samples"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    n: int = 1
    degree: int = 4
    rule: str = "product"
    m: int | None = None
    mc_samples: int = 200_000
    seed: int = 0
    factor: dict = field(default_factory=lambda: {"kind": "constant", "c": 1.0})
    t_grid: list | None = None
    eps_grid: list | None = None
    allowance: float = 1e-3
    samples: int | None = None
    count: int | None = None
    h: float = 1e-6
    out: str | None = None
    format: str = "json"

    def validate(self):
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.degree < 1:
            raise ConfigError("degree must be >= 1")
        if self.rule not in ("product", "montecarlo"):
            raise ConfigError(f"unknown rule {self.rule!r}")
        if self.rule == "product" and self.n != 1:
            raise ConfigError("the product rule exists only for n = 1; use --rule montecarlo")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")
        for name in ("t_grid", "eps_grid"):
            grid = getattr(self, name)
            if grid is not None and not grid:
                raise ConfigError(f"{name} is empty")
        if self.t_grid is not None and any(t < 0 for t in self.t_grid):
            raise ConfigError("t values must be >= 0")
        if self.samples is not None and self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.allowance < 0:
            raise ConfigError("allowance must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


def _grid(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}") from exc


def _shorthand(text: str) -> dict:
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    d: dict = {"kind": kind}
    if not rest:
        return d
    if kind == "constant" and "=" not in rest:
        d["c"] = rest
        return d
    for item in rest.split(","):
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"expected key=value in factor description, got {item!r}")
        d[key.strip()] = val.strip()
    return d


def resolve_factor(source, n: int, seed: int) -> dict:
    """Turn a factor description (JSON text, shorthand or dict) into a complete descriptor."""
    if isinstance(source, str):
        text = source.strip()
        if text.startswith("{"):
            try:
                source = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"malformed factor JSON: {exc}") from exc
        else:
            source = _shorthand(text)
    if not isinstance(source, dict) or "kind" not in source:
        raise ConfigError("factor must be an object with a 'kind'")
    d = dict(source)
    kind = d["kind"]
    try:
        if kind == "constant":
            d["c"] = float(d.get("c", 1.0))
            if d["c"] <= 0:
                raise ConfigError("constant factor must be positive")
        elif kind == "extremal":
            if d.get("pole") is None:
                d["pole"] = random_sphere_points(n, 1, np.random.default_rng(seed))[0].tolist()
            elif isinstance(d["pole"], str):
                d["pole"] = [float(v) for v in d["pole"].split(";")]
            d["pole"] = [float(v) for v in d["pole"]]
            d["t"] = float(d.get("t", 0.0))
            d["scale"] = float(d.get("scale", 1.0))
        elif kind == "exppoly":
            d["eps"] = float(d.get("eps", 0.2))
            d["scale"] = float(d.get("scale", 1.0))
            if "poly" not in d:
                d["seed"] = int(d.get("seed", seed))
                d["degree"] = int(d.get("degree", 2))
        elif kind == "polypositive":
            if "poly" not in d:
                raise ConfigError("polypositive factor needs 'poly'")
        else:
            raise ConfigError(f"unknown factor kind {kind!r}")
        factor_from_dict(d, n)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError, PolynomialParseError, OffSphereError) as exc:
        raise ConfigError(f"invalid factor {source!r}: {exc}") from exc
    return d


_FLAG_KEYS = (
    "n", "degree", "rule", "m", "mc_samples", "seed", "factor", "t_grid",
    "eps_grid", "allowance", "samples", "count", "h", "out", "format",
)


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                values.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for key in _FLAG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    unknown = set(values) - set(_FLAG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    for key in ("t_grid", "eps_grid"):
        if isinstance(values.get(key), (str, int, float)):
            values[key] = _grid(values[key])
    if "rule" not in values and values.get("n", 1) != 1:
        values["rule"] = "montecarlo"
    try:
        cfg = RunConfig(command=args.command, **values)
        cfg.n, cfg.degree, cfg.seed = int(cfg.n), int(cfg.degree), int(cfg.seed)
        cfg.mc_samples = int(cfg.mc_samples)
        cfg.allowance, cfg.h = float(cfg.allowance), float(cfg.h)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    cfg.factor = resolve_factor(cfg.factor, cfg.n, cfg.seed)
    if cfg.m is None and cfg.rule == "product":
        cfg.m = {"balance": 32, "check-identities": 48}.get(cfg.command, 2 * cfg.degree + 6)
    if cfg.m is not None and int(cfg.m) < 2:
        raise ConfigError("m must be >= 2")
    if cfg.rule == "montecarlo" and cfg.mc_samples < 1000:
        raise ConfigError("mc-samples must be >= 1000")
    return cfg


def make_rule(cfg: RunConfig) -> QuadratureRule:
    if cfg.rule == "product":
        return product_rule_s3(int(cfg.m))
    return monte_carlo_rule(cfg.n, cfg.mc_samples, cfg.seed)


def _workers(items: int) -> int:
    cap = os.environ.get("CR_SPECTRA_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            pass
    return max(1, min(limit, items))


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _emit(cfg: RunConfig, payload: dict, columns: list[str], rows: list[list], summary: dict | None = None):
    if cfg.format == "json":
        text = json.dumps({"config": cfg.to_dict(), **payload}, indent=2) + "\n"
    else:
        buf = io.StringIO()
        buf.write("# config: " + json.dumps(cfg.to_dict(), sort_keys=True) + "\n")
        if summary is not None:
            buf.write("# summary: " + json.dumps(summary, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- commands ------------------------------------------------------------------


def cmd_spectrum(cfg: RunConfig) -> int:
    rule = make_rule(cfg)
    f = factor_from_dict(cfg.factor, cfg.n)
    result = invariant_report(f, cfg.n, cfg.degree, rule, count=cfg.count)
    d = result.to_dict()
    rows = []
    for i, v in enumerate(result.eigenvalues):
        rows.append([i, float(v)])
    summary = {k: d[k] for k in ("lambda1", "volume", "invariant", "bound", "margin", "clusters")}
    _emit(cfg, {"result": d}, ["index", "eigenvalue"], rows, summary)
    return EXIT_OK


def _verify_items(cfg: RunConfig):
    d = cfg.factor
    if d["kind"] == "extremal":
        grid = cfg.t_grid if cfg.t_grid is not None else [0.0, 0.25, 0.5]
        return [(f"extremal(t={t:g})", {**d, "t": t}) for t in grid]
    if d["kind"] == "exppoly" and "poly" not in d:
        grid = cfg.eps_grid if cfg.eps_grid is not None else [d["eps"]]
        samples = cfg.samples if cfg.samples is not None else 20
        return [
            (f"exppoly(eps={eps:g},seed={d['seed'] + s})", {**d, "eps": eps, "seed": d["seed"] + s})
            for eps in grid
            for s in range(samples)
        ]
    return [(d["kind"], d)]


def cmd_verify(cfg: RunConfig) -> int:
    rule = make_rule(cfg)
    items = _verify_items(cfg)

    def run(item):
        fid, desc = item
        return fid, invariant_report(factor_from_dict(desc, cfg.n), cfg.n, cfg.degree, rule)

    with ThreadPoolExecutor(max_workers=_workers(len(items))) as pool:
        results = list(pool.map(run, items))
    rows, violations = [], []
    for fid, r in results:
        rows.append([fid, r.lambda1, r.volume, r.invariant, r.bound, r.margin])
        if r.margin < -cfg.allowance * r.bound:
            violations.append(fid)
    payload = {
        "rows": [dict(zip(VERIFY_COLUMNS, row)) for row in rows],
        "violations": violations,
    }
    _emit(cfg, payload, VERIFY_COLUMNS, rows)
    if violations:
        print(
            f"margin below -{cfg.allowance:g} * bound for {len(violations)} factor(s): "
            f"{', '.join(violations)}. Either the inequality fails or the resolution "
            f"(degree {cfg.degree}, {rule.descriptor}) is too coarse.",
            file=sys.stderr,
        )
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_balance(cfg: RunConfig) -> int:
    rule = make_rule(cfg)
    f = factor_from_dict(cfg.factor, cfg.n)
    mu = WeightedMeasure.from_factor(rule, f)
    point = solve_balance(mu)
    d = point.to_dict()
    cols = ["t", "residual", "iterations"] + [f"pole_{i}" for i in range(len(point.pole))]
    _emit(cfg, {"result": d}, cols, [[point.t, point.residual, point.iterations] + list(map(float, point.pole))])
    return EXIT_OK if point.residual <= 1e-8 else EXIT_NUMERIC


def identity_residuals(cfg: RunConfig) -> list[tuple[str, float, float, int]]:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    samples = cfg.samples if cfg.samples is not None else 100

    def draw_t():
        if cfg.t_grid is not None:
            return float(cfg.t_grid[rng.integers(len(cfg.t_grid))])
        return float(rng.uniform(0.0, 2.0))

    worst = {k: 0.0 for k in (
        "pullback_identity", "pullback_identity_unitary", "cr_map_energy", "group_law",
        "cocycle", "conjugation", "sphere_preservation", "cayley_roundtrip",
    )}
    volume_cases = []
    for _ in range(samples):
        p = random_sphere_points(n, 1, rng)[0]
        z = random_sphere_points(n, 1, rng)[0]
        t, s = draw_t(), draw_t()
        U, V = random_unitary(n, rng), random_unitary(n, rng)
        g = CrAutomorphism(p, t)
        gz = g(z)
        worst["pullback_identity"] = max(worst["pullback_identity"], pullback_residual(g, z, cfg.h))
        gu = CrAutomorphism(p, t, pre_unitary=U, post_unitary=V)
        worst["pullback_identity_unitary"] = max(worst["pullback_identity_unitary"], pullback_residual(gu, z, cfg.h))
        energy = float(horizontal_energy(g, z, cfg.h)[0])
        worst["cr_map_energy"] = max(worst["cr_map_energy"], abs(energy - 2 * n * float(g.factor(z))))
        gs, gst = CrAutomorphism(p, s), CrAutomorphism(p, s + t)
        worst["group_law"] = max(worst["group_law"], float(np.max(np.abs(gs(gz) - gst(z)))))
        comp = compose(gs, g)
        worst["cocycle"] = max(worst["cocycle"], abs(float(comp.factor(z)) - float(gst.factor(z))))
        worst["conjugation"] = max(
            worst["conjugation"], float(np.max(np.abs(conjugated_dilation(p, t)(z) - gz)))
        )
        worst["sphere_preservation"] = max(worst["sphere_preservation"], abs(float(np.linalg.norm(gu(z))) - 1.0))
        if abs(1.0 - complex(z[-2], z[-1])) > 1e-3:
            back = cayley_to_sphere(cayley_to_siegel(z), renormalize_result=False)
            worst["cayley_roundtrip"] = max(worst["cayley_roundtrip"], float(np.max(np.abs(back - z))))
        if t <= 1.0:
            volume_cases.append((p, t))

    rows = [
        ("pullback_identity", worst["pullback_identity"], FD_THRESHOLD),
        ("pullback_identity_unitary", worst["pullback_identity_unitary"], FD_THRESHOLD),
        ("cr_map_energy", worst["cr_map_energy"], FD_THRESHOLD),
        ("group_law", worst["group_law"], ALGEBRAIC_THRESHOLD),
        ("cocycle", worst["cocycle"], ALGEBRAIC_THRESHOLD),
        ("conjugation", worst["conjugation"], ALGEBRAIC_THRESHOLD),
        ("sphere_preservation", worst["sphere_preservation"], SPHERE_THRESHOLD),
        ("cayley_roundtrip", worst["cayley_roundtrip"], ALGEBRAIC_THRESHOLD),
    ]
    out = [(name, val, thr, samples) for name, val, thr in rows]
    if n == 1 and cfg.rule == "product" and volume_cases:
        rule = make_rule(cfg)
        vol = sphere_volume(n)
        err = max(abs(integrate(Extremal(p, t)(rule.nodes) ** (n + 1), rule) - vol) for p, t in volume_cases)
        out.append(("volume_law", err, VOLUME_THRESHOLD, len(volume_cases)))
    return out


def cmd_check_identities(cfg: RunConfig) -> int:
    results = identity_residuals(cfg)
    rows = [[name, val, thr, val <= thr, k] for name, val, thr, k in results]
    payload = {"checks": [dict(zip(CHECK_COLUMNS, row)) for row in rows]}
    _emit(cfg, payload, CHECK_COLUMNS, rows)
    failed = [r[0] for r in rows if not r[3]]
    if failed:
        print(f"identity checks above threshold: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "verify": cmd_verify,
    "balance": cmd_balance,
    "check-identities": cmd_check_identities,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crspectra",
        description="First sub-Laplacian eigenvalue on CR spheres under conformal changes of the contact form.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("spectrum", "eigenvalues and multiplicity clusters for one conformal factor"),
        ("verify", "check lambda_1 V^{1/(n+1)} <= 2n V_0^{1/(n+1)} over a factor family"),
        ("balance", "find (p, t) balancing the measure psi_{f theta_0}"),
        ("check-identities", "randomized checks of the automorphism identities"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with any of the options below; flags override it")
        p.add_argument("--n", type=int)
        p.add_argument("--degree", type=int, help="polynomial trial space degree D")
        p.add_argument("--rule", choices=["product", "montecarlo"])
        p.add_argument("--m", type=int, help="product rule parameter (default 2D+6)")
        p.add_argument("--mc-samples", dest="mc_samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--factor", help="JSON object or shorthand such as constant:5, extremal:t=0.5")
        p.add_argument("--t-grid", dest="t_grid", help="comma-separated t values")
        p.add_argument("--eps-grid", dest="eps_grid", help="comma-separated epsilon values")
        p.add_argument("--allowance", type=float, help="allowed negative margin, relative to the bound")
        p.add_argument("--samples", type=int, help="random draws (verify: seeds per epsilon)")
        p.add_argument("--count", type=int, help="number of eigenvalues to report")
        p.add_argument("--h", type=float, help="finite-difference step")
        p.add_argument("--out")
        p.add_argument("--format", choices=["json", "csv"])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[cfg.command](cfg)
    except NoConvergence as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if exc.best is not None:
            print(json.dumps({"best": exc.best.to_dict()}), file=sys.stderr)
        return EXIT_NUMERIC
    except (SpectralError, BalanceError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
