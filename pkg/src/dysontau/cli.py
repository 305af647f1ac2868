"""Command-line front end.

Every subcommand reads an optional JSON config (``--config``), validates it
against a schema that rejects unknown keys, runs the computation and writes
one tidy table (CSV by default) to ``--out`` or stdout. Diagnostics go to
stderr. Exit codes: 0 ok, 1 invalid input, 2 flagged non-convergence or a
failed check, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import warnings

import jsonschema
import numpy as np

from . import canonical, dispersionless, fock, grand
from .logvalue import LogValue
from .times import TimeVector

log = logging.getLogger("dysontau")

EXIT_OK, EXIT_INVALID, EXIT_FLAGGED, EXIT_INTERNAL = 0, 1, 2, 3

# ------------------------------------------------------------------ schemas

_number = {"type": "number"}
_complex = {"oneOf": [_number, {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}]}
_times = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "plus": {"type": "array", "items": _complex},
        "minus": {"type": "array", "items": _complex},
    },
}
_n_or_list = {"oneOf": [{"type": "integer"}, {"type": "array", "items": {"type": "integer"}, "minItems": 1}]}
_common = {
    "seed": {"type": "integer", "minimum": 0},
    "threads": {"type": "integer", "minimum": 1},
    "format": {"enum": ["csv", "json"]},
}
_disk_ensemble = {
    "epsilon": {"type": "number", "exclusiveMinimum": 0},
    "t0": _number,
    "times": _times,
    "fugacity": {"type": "number", "minimum": 0},
}
_measure = {
    "type": "object",
    "additionalProperties": False,
    "required": ["variant"],
    "properties": {
        "variant": {"enum": ["radial_gaussian", "circle", "discrete"]},
        "c": {"type": "number", "exclusiveMinimum": 0},
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "points": {"type": "array", "items": _complex},
        "weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
    },
}
_domain = {
    "type": "object",
    "additionalProperties": False,
    "required": ["variant"],
    "properties": {
        "variant": {"enum": ["disk", "half_disk", "bitmap"]},
        "radius": {"type": "number", "minimum": 0},
        "center": _complex,
        "path": {"type": "string"},
    },
}


def _schema(props: dict, required=()) -> dict:
    return {
        "type": "object",
        "additionalProperties": False,
        "required": list(required),
        "properties": {**_common, **props},
    }


SCHEMAS = {
    "schur-tau": _schema({
        "N": _n_or_list, "c": {"type": "number", "exclusiveMinimum": 0}, "times": _times,
        "cutoff": {"type": "integer", "minimum": 0},
    }, ["N"]),
    "toeplitz-tau": _schema({"N": _n_or_list, "times": _times, "n_grid": {"type": "integer", "minimum": 4}}, ["N"]),
    "mc-tau": _schema({
        "N": _n_or_list, "measure": _measure, "times": _times,
        "samples": {"type": "integer", "minimum": 1}, "batches": {"type": "integer", "minimum": 2},
    }, ["N"]),
    "hirota": _schema({
        "family": {"enum": ["gaussian", "toeplitz", "disk"]},
        "n": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "points": {"type": "integer", "minimum": 1},
        "max_abs_t": {"type": "number", "exclusiveMinimum": 0},
        "K": {"type": "integer", "minimum": 1},
        "step": {"type": "number", "exclusiveMinimum": 0},
        "c": {"type": "number", "exclusiveMinimum": 0},
        "cutoff": {"type": "integer", "minimum": 0},
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "fugacity": {"type": "number", "minimum": 0},
        "tol": {"type": "number", "exclusiveMinimum": 0},
    }),
    "fredholm-circle": _schema({**_disk_ensemble, "M": {"type": "integer", "minimum": 8}}, ["epsilon"]),
    "fredholm-halfplane": _schema({
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "times": _times,
        "window": {"type": "number", "exclusiveMinimum": 0},
        "M": {"type": "integer", "minimum": 8},
        "imaginary_times": {"type": "boolean"},
    }, ["epsilon"]),
    "grand-expansion": _schema({
        **_disk_ensemble,
        "N_max": {"type": "integer", "minimum": 0, "maximum": 5},
        "M": {"type": "integer", "minimum": 8},
    }, ["epsilon"]),
    "wick-verify": _schema({
        "window": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "random_cases": {"type": "integer", "minimum": 0},
    }),
    "dispersionless": _schema({
        "domain": _domain,
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "quantities": {"type": "array", "items": {"enum": ["moments", "F0", "F0_tilde", "fatslit_moments"]}},
        "k_max": {"type": "integer", "minimum": 1},
        "h": {"type": "number", "exclusiveMinimum": 0},
    }, ["domain"]),
    "asymptotics": _schema({"N": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}}),
    "crosscheck": _schema({
        "target": {"enum": ["fredholm-circle", "schur-mc", "toeplitz-quadrature", "operator-integral"]},
        **_disk_ensemble,
        "M": {"type": "integer", "minimum": 8},
        "N_max": {"type": "integer", "minimum": 0, "maximum": 5},
        "N": _n_or_list,
        "c": {"type": "number", "exclusiveMinimum": 0},
        "cutoff": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "n_nodes": {"type": "integer", "minimum": 2},
        "points": {"type": "array", "items": _complex},
        "weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
    }),
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- helpers


def _cx(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _times_from(cfg) -> TimeVector:
    if not cfg:
        return TimeVector.zero()
    plus = [_cx(v) for v in cfg.get("plus", [])]
    if "minus" not in cfg:
        return TimeVector.locked(plus)
    return TimeVector(plus, [_cx(v) for v in cfg["minus"]])


def _as_list(n):
    return n if isinstance(n, list) else [n]


def _logvalue_cols(v: LogValue, prefix: str = "") -> dict:
    return {f"{prefix}log_magnitude": v.log_magnitude, f"{prefix}phase": v.phase}


class Table:
    """Rows with a fixed column order; ``flagged`` collects non-convergence."""

    def __init__(self):
        self.rows: list[dict] = []
        self.flagged = False

    def add(self, **row):
        if "error" not in row:
            raise AssertionError("every row needs an error estimate or 'exact'")
        self.rows.append(row)

    def columns(self):
        cols = []
        for r in self.rows:
            for k in r:
                if k not in cols:
                    cols.append(k)
        return cols


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else _fmt(v)
    return v


def render(table: Table, fmt: str) -> str:
    cols = table.columns()
    if fmt == "json":
        rows = [{c: _jsonable(r.get(c, "")) for c in cols} for r in table.rows]
        return json.dumps(rows, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in table.rows:
        w.writerow([_fmt(r.get(c, "")) for c in cols])
    return buf.getvalue()


def _rng_times(rng, K, max_abs):
    r = max_abs * np.sqrt(rng.uniform(size=K))
    return TimeVector.locked(r * np.exp(2j * np.pi * rng.uniform(size=K)))


# ------------------------------------------------------------ subcommands


def cmd_schur_tau(cfg, args, table):
    t = _times_from(cfg.get("times"))
    c = cfg.get("c", 1.0)
    cutoff = cfg.get("cutoff", 8)
    exact = t.K == 0
    for N in _as_list(cfg["N"]):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", canonical.ConvergenceWarning)
            r = canonical.tau_gaussian_schur(N, c, t, cutoff)
        if caught:
            table.flagged = True
            for w in caught:
                log.warning("N=%d: %s", N, w.message)
        table.add(N=N, c=c, cutoff=cutoff, **_logvalue_cols(r.value),
                  error="exact" if exact else r.last_shell, error_kind="exact" if exact else "last_shell_ratio")


def cmd_toeplitz_tau(cfg, args, table):
    t = _times_from(cfg.get("times"))
    for N in _as_list(cfg["N"]):
        n_grid = cfg.get("n_grid") or canonical._auto_grid(t, N, None)[0]
        v = canonical.tau_toeplitz(N, t, n_grid)
        v2 = canonical.tau_toeplitz(N, t, 2 * n_grid)
        table.add(N=N, **_logvalue_cols(v), error=v.relative_difference(v2), error_kind="grid_doubling_rel")


def _measure_from(cfg):
    m = cfg or {"variant": "radial_gaussian"}
    if m["variant"] == "radial_gaussian":
        return canonical.MeasureSpec.radial_gaussian(m.get("c", 1.0))
    if m["variant"] == "circle":
        return canonical.MeasureSpec.circle(m.get("radius", 1.0))
    pts, wts = m.get("points"), m.get("weights")
    if not pts or wts is None or len(pts) != len(wts):
        raise ConfigError("discrete measure needs points and weights of equal length")
    return canonical.MeasureSpec.discrete([_cx(p) for p in pts], wts)


def cmd_mc_tau(cfg, args, table):
    t = _times_from(cfg.get("times"))
    measure = _measure_from(cfg.get("measure"))
    samples = cfg.get("samples", 100_000)
    batches = cfg.get("batches", 32)
    for N in _as_list(cfg["N"]):
        r = canonical.tau_integral_mc(N, measure, t, samples, args.seed, batches=batches, threads=args.threads)
        table.add(N=N, samples=samples, seed=args.seed, **_logvalue_cols(r.value),
                  error=r.rel_stderr, error_kind="rel_stderr")


def cmd_hirota(cfg, args, table):
    family = cfg.get("family", "gaussian")
    rng = np.random.default_rng(args.seed)
    n_list = cfg.get("n", [1, 2, 3])
    step = cfg.get("step", 1e-3)
    tol = cfg.get("tol", 1e-4)
    if family == "gaussian":
        fam = canonical.gaussian_tau_family(cfg.get("c", 1.0), cfg.get("cutoff", 60))
        K, max_abs = cfg.get("K", 2), cfg.get("max_abs_t", 0.3)
    elif family == "toeplitz":
        fam = canonical.toeplitz_tau_family()
        K, max_abs = cfg.get("K", 4), cfg.get("max_abs_t", 0.3)
    else:
        fam = grand.disk_tau_family(cfg.get("epsilon", 0.5), cfg.get("fugacity", 1.0))
        K, max_abs = cfg.get("K", 2), cfg.get("max_abs_t", 0.2)
    for p in range(cfg.get("points", 5)):
        t = _rng_times(rng, K, max_abs)
        for n in n_list:
            res = canonical.hirota_residual(fam, n, t, step=step)
            if res > tol:
                table.flagged = True
                log.warning("residual %.3g above %.3g at n=%d point %d", res, tol, n, p)
            table.add(family=family, point=p, n=n, t1_re=t.plus[1].real, t1_im=t.plus[1].imag,
                      residual=res, error=res, error_kind="residual")


def _disk_spec(cfg):
    return grand.DiskEnsembleSpec(cfg["epsilon"], cfg.get("t0", 0), _times_from(cfg.get("times")),
                                  cfg.get("fugacity", 1.0))


def cmd_fredholm_circle(cfg, args, table):
    spec = _disk_spec(cfg)
    M = cfg.get("M", 256)
    r = grand.fredholm_det_circle(spec, M)
    table.flagged |= r.flagged
    table.add(epsilon=spec.epsilon, t0=spec.t0, fugacity=spec.fugacity, M=M, **_logvalue_cols(r.value),
              error=r.error, error_kind="M_doubling_rel", flagged=r.flagged)


def cmd_fredholm_halfplane(cfg, args, table):
    times = [_cx(v) for v in (cfg.get("times") or {}).get("plus", [])]
    spec = grand.HalfPlaneEnsembleSpec(cfg["epsilon"], times, cfg.get("window"),
                                       imaginary_times=cfg.get("imaginary_times", False))
    M = cfg.get("M", 128)
    r = grand.fredholm_det_halfplane(spec, M)
    table.flagged |= r.flagged
    table.add(epsilon=spec.epsilon, window=spec.window, M=M, **_logvalue_cols(r.value),
              error=r.error, error_kind="window_tail", flagged=r.flagged)


def cmd_grand_expansion(cfg, args, table):
    spec = _disk_spec(cfg)
    M = cfg.get("M", 48)
    N_max = cfg.get("N_max", 3)
    terms = grand.grand_expansion_circle(spec, N_max, M)
    finer = grand.grand_expansion_circle(spec, N_max, M + M // 2)
    for N, (a, b) in enumerate(zip(terms, finer)):
        table.add(N=N, M=M, **_logvalue_cols(a), error="exact" if N == 0 else a.relative_difference(b),
                  error_kind="exact" if N == 0 else "M_refinement_rel")


def cmd_wick_verify(cfg, args, table):
    w = cfg.get("window", [-3, 7])
    rows = fock.identity_suite(fock.FockWindow(*w), seed=args.seed, n_random=cfg.get("random_cases", 20))
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 6))
        N = int(rng.integers(-2, 3))
        z, s = fock.random_field_instance(rng, n)
        worst = max(worst, fock.vev_fields_product(N, z, s).difference)
    rows.append(fock.IdentityCheck("field correlator closed forms", worst, 1e-12))
    for r in rows:
        if not r.passed:
            table.flagged = True
            log.error("identity failed: %s (error %.3g)", r.name, r.error)
        table.add(identity=r.name, error=r.error, tol=r.tol, passed=r.passed)


def _domain_from(cfg):
    v = cfg["variant"]
    if v == "bitmap":
        if "path" not in cfg:
            raise ConfigError("bitmap domain needs 'path'")
        from pathlib import Path

        return dispersionless.DomainSpec.from_bitmap(Path(cfg["path"]))
    if "radius" not in cfg:
        raise ConfigError(f"{v} domain needs 'radius'")
    c = _cx(cfg.get("center", 0))
    if v == "disk":
        return dispersionless.DomainSpec.disk(cfg["radius"], c)
    return dispersionless.DomainSpec.half_disk(cfg["radius"], c.real)


def cmd_dispersionless(cfg, args, table):
    D = _domain_from(cfg["domain"])
    sigma = dispersionless.ChargeDensity(value=cfg.get("sigma", 1 / np.pi))
    h = cfg.get("h", 0.01)
    k_max = cfg.get("k_max", 4)
    default = ["fatslit_moments", "F0_tilde"] if D.variant == "half_disk" else ["moments", "F0"]
    for q in cfg.get("quantities", default):
        if q == "moments":
            m = dispersionless.harmonic_moments(D, sigma, k_max, h)
            table.flagged |= m.flagged
            table.add(quantity="T", k=0, re=m.T0, im=0.0, error=m.error[0])
            for k in range(1, k_max + 1):
                table.add(quantity="T", k=k, re=m.T[k - 1].real, im=m.T[k - 1].imag, error=m.error[k])
        elif q == "fatslit_moments":
            m = dispersionless.fatslit_moments(D, sigma, k_max, h)
            for k in range(1, k_max + 1):
                table.add(quantity="T_fatslit", k=k, re=m.T[k - 1].real, im=m.T[k - 1].imag, error=m.error[k])
        elif q == "F0":
            e = dispersionless.F0_energy(D, sigma, h)
            table.add(quantity="F0", k="", re=e.value, im=0.0, error=e.error)
        else:
            e = dispersionless.F0_tilde_fatslit(D, sigma, h)
            table.add(quantity="F0_tilde", k="", re=e.value, im=0.0, error=e.error)


def cmd_asymptotics(cfg, args, table):
    for r in dispersionless.asymptotic_check_gaussian(cfg.get("N", [1, 50, 100, 200, 500, 1000])):
        table.add(N=r.N, log_tau=r.log_tau, prediction=r.prediction, deviation=r.deviation, error="exact")


def cmd_crosscheck(cfg, args, table):
    target = args.target or cfg.get("target")
    if target is None:
        raise ConfigError("crosscheck needs a target")
    if target == "fredholm-circle":
        spec = _disk_spec({"epsilon": 0.5, "fugacity": 0.01, **cfg})
        M = cfg.get("M", 256)
        N_max = cfg.get("N_max", 4)
        fd = grand.fredholm_det_circle(spec, M)
        terms = grand.grand_expansion_circle(spec, N_max, 48)
        series = sum((complex(v) for v in terms), 0j)
        bound = grand.fredholm_series_bound(grand.circle_nystrom_matrix(spec, M), N_max)
        f = complex(fd.value)
        delta = abs(f - series) / abs(f)
        if bound >= 1e-8 or delta > 1e-6:
            table.flagged = True
            log.warning("series not certified (bound %.3g) or mismatch %.3g", bound, delta)
        table.add(fredholm=f.real, series_sum=series.real, delta=delta, bound=bound, error=delta)
    elif target == "schur-mc":
        t = _times_from(cfg.get("times") or {"plus": [0.1]})
        for N in _as_list(cfg.get("N", [2, 3])):
            s = canonical.tau_gaussian_schur(N, cfg.get("c", 1.0), t, cfg.get("cutoff", 8)).value
            mc = canonical.tau_integral_mc(N, canonical.MeasureSpec.radial_gaussian(cfg.get("c", 1.0)), t,
                                           cfg.get("samples", 1_000_000), args.seed, threads=args.threads)
            z = abs(complex(s) - complex(mc.value)) / (mc.rel_stderr * abs(complex(mc.value)))
            table.flagged |= z > 3
            table.add(N=N, schur=float(s), mc=float(mc.value), z_score=z, error=mc.rel_stderr)
    elif target == "toeplitz-quadrature":
        t = _times_from(cfg.get("times") or {"plus": [0.2, [0.0, 0.1]]})
        for N in _as_list(cfg.get("N", [2, 3])):
            a = canonical.tau_toeplitz(N, t)
            b = canonical.unitary_integral_quadrature(N, t, cfg.get("n_nodes", 24))
            d = a.relative_difference(b)
            table.flagged |= d > 1e-6
            table.add(N=N, toeplitz=float(a), quadrature=float(b), delta=d, error=d)
    else:
        pts = [_cx(p) for p in cfg.get("points", [[0.3, 0.2], -0.5, [0.1, -0.7]])]
        wts = cfg.get("weights", [0.7, 1.1, 0.5])
        t = _times_from(cfg.get("times") or {"plus": [0.1]})
        for N in _as_list(cfg.get("N", [0, 1, 2])):
            r = fock.tau_operator_vs_integral(N, t, pts, wts)
            stray = max((abs(v) for m, v in r.terms.items() if m != N), default=0.0)
            table.flagged |= r.delta > 1e-10 or stray != 0
            table.add(N=N, operator=float(r.operator) if not r.operator.is_zero else 0.0,
                      integral=float(r.integral) if not r.integral.is_zero else 0.0,
                      delta=r.delta, stray_terms=stray, drift=r.drift, error=r.delta)


COMMANDS = {
    "schur-tau": cmd_schur_tau,
    "toeplitz-tau": cmd_toeplitz_tau,
    "mc-tau": cmd_mc_tau,
    "hirota": cmd_hirota,
    "fredholm-circle": cmd_fredholm_circle,
    "fredholm-halfplane": cmd_fredholm_halfplane,
    "grand-expansion": cmd_grand_expansion,
    "wick-verify": cmd_wick_verify,
    "dispersionless": cmd_dispersionless,
    "asymptotics": cmd_asymptotics,
    "crosscheck": cmd_crosscheck,
}

_NEEDS_CONFIG = {"schur-tau", "toeplitz-tau", "mc-tau", "fredholm-circle", "fredholm-halfplane",
                 "grand-expansion", "dispersionless"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dysontau", description="Tau functions of 2D Dyson gases.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        if name == "crosscheck":
            s.add_argument("target", nargs="?", choices=SCHEMAS["crosscheck"]["properties"]["target"]["enum"])
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--out", help="output file (default: stdout)")
        s.add_argument("--format", choices=["csv", "json"], default=None)
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--threads", type=int, default=None)
    return p


def _load_config(args) -> dict:
    if args.config is None:
        cfg = {}
    else:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, SCHEMAS[args.command])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config: {exc.message}") from exc
    if args.command in _NEEDS_CONFIG and not cfg:
        raise ConfigError(f"{args.command} needs --config")
    return cfg


def run(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        cfg = _load_config(args)
        args.seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        args.threads = args.threads if args.threads is not None else cfg.get("threads", 1)
        fmt = args.format or cfg.get("format", "csv")
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigError("threads must be positive")
        table = Table()
        COMMANDS[args.command](cfg, args, table)
    except dispersionless.NonConvergentMomentError as exc:
        log.error("%s", exc)
        return EXIT_FLAGGED
    except (ConfigError, ValueError, TypeError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL
    text = render(table, fmt)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_FLAGGED if table.flagged else EXIT_OK


def main() -> None:
    sys.exit(run())
