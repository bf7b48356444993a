"""Command-line interface: ``validate``, ``quantize`` and ``verify``.

Problem files are INI-style text::

    [dims]
    p = 1
    q = 2

    [domain]              ; optional, default [-1, 1]^n
    lower = -1, -1, -1
    upper = 1, 1, 1

    [connection]          ; 1-based Gamma[i][k][l], mirrored in (k, l)
    Gamma[2][2][3] = 0.3*y1*y2

    [symbol]              ; values are monomial coefficients
    degree = 2
    S[2][3] = 1 + y1      ; coefficient of xi_2 xi_3, indices 1-based
    S[3][3] = 0.5         ; degree 0 uses the bare key S

    [function]
    f = sin(y1) + y2^2

    [points]
    m1 = 0.1, 0.2, 0.3

Reports are JSON objects carrying ``"schema": 1``.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import re
import sys
from dataclasses import dataclass

import numpy as np

from . import exprlang, quant, verify
from .cartan import adapted_cartan, foliated_cartan
from .chart import (
    AdaptedConnection,
    AdaptednessError,
    CodimensionError,
    Connection,
    FoliatedChart,
    FoliatedConnection,
    induce_foliated,
    validate_adapted,
)
from .exprlang import ExprError, ScalarFieldExpr

SCHEMA = 1
SEED_ENV = "FOLIQUANT_SEED"

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class ConfigError(ValueError):
    """Malformed problem file; ``offset`` is a byte offset into the file when known."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        where = f" (byte {offset})" if offset is not None else ""
        super().__init__(message + where)


# ---------------------------------------------------------------------------
# problem files
# ---------------------------------------------------------------------------

_GAMMA_KEY = re.compile(r"Gamma((?:\[\d+\]){3})")
_SYMBOL_KEY = re.compile(r"S((?:\[\d+\])*)")
_INDEX = re.compile(r"\[(\d+)\]")


@dataclass
class ProblemConfig:
    p: int
    q: int
    chart: FoliatedChart
    gamma: dict
    degree: int
    symbol: dict
    function: ScalarFieldExpr
    points: np.ndarray

    def connection(self, cls=AdaptedConnection, chart: FoliatedChart | None = None) -> Connection:
        return cls(chart or self.chart, gamma=self.gamma)

    def symbol_field(self, kind: str = "adapted") -> quant.SymbolField:
        return quant.SymbolField(self.chart, self.degree, self.symbol, kind=kind)


def _value_offsets(text: str) -> dict[tuple[str, str], int]:
    """Byte offset of each ``key = value`` value, keyed by ``(section, key)``."""
    out = {}
    section = None
    pos = 0
    for line in text.splitlines(keepends=True):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
        elif section is not None and not stripped.startswith((";", "#")):
            for sep in ("=", ":"):
                if sep in line:
                    key, rest = line.split(sep, 1)
                    lead = len(rest) - len(rest.lstrip())
                    start = len(key) + 1 + lead
                    out.setdefault((section, key.strip()), len(text[:pos].encode()) + len(line[:start].encode()))
                    break
        pos += len(line)
    return out


class _Reader:
    def __init__(self, text: str):
        self.parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
        self.parser.optionxform = str
        try:
            self.parser.read_string(text)
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            offset = len("".join(text.splitlines(keepends=True)[: line - 1]).encode()) if line else None
            raise ConfigError(f"cannot read problem file: {exc.message}", offset) from None
        self.offsets = _value_offsets(text)

    def offset(self, section: str, key: str) -> int | None:
        return self.offsets.get((section, key))

    def section(self, name: str, required: bool = True) -> dict[str, str]:
        if not self.parser.has_section(name):
            if required:
                raise ConfigError(f"missing section [{name}]")
            return {}
        return dict(self.parser.items(name))

    def integer(self, section: str, key: str) -> int:
        items = self.section(section)
        if key not in items:
            raise ConfigError(f"missing key {key!r} in [{section}]")
        try:
            return int(items[key])
        except ValueError:
            raise ConfigError(f"{section}.{key} must be an integer", self.offset(section, key)) from None

    def numbers(self, section: str, key: str, count: int) -> tuple[float, ...]:
        raw = self.section(section)[key]
        try:
            vals = tuple(float(v) for v in raw.split(","))
        except ValueError:
            raise ConfigError(f"{section}.{key} must be a comma-separated list of numbers", self.offset(section, key)) from None
        if len(vals) != count:
            raise ConfigError(f"{section}.{key} needs {count} values, got {len(vals)}", self.offset(section, key))
        return vals

    def expression(self, section: str, key: str, p: int, q: int) -> ScalarFieldExpr:
        text = self.section(section)[key]
        try:
            return exprlang.parse(text, p, q)
        except ExprError as exc:
            base = self.offset(section, key)
            offset = None if base is None or exc.offset is None else base + exc.offset
            raise ConfigError(f"{section}.{key}: {exc.message}", offset) from None


def _indices(raw: str, n: int, where: str, offset: int | None) -> list[int]:
    idx = [int(v) - 1 for v in _INDEX.findall(raw)]
    if any(not 0 <= i < n for i in idx):
        raise ConfigError(f"{where}: indices must lie in 1..{n}", offset)
    return idx


def parse_config(text: str) -> ProblemConfig:
    """Parse a problem file.  Raises :class:`ConfigError` or :class:`CodimensionError`."""
    rd = _Reader(text)
    p, q = rd.integer("dims", "p"), rd.integer("dims", "q")
    if p < 0:
        raise ConfigError("dims.p must be non-negative", rd.offset("dims", "p"))
    n = p + q
    chart_kw = {}
    domain = rd.section("domain", required=False)
    for key in ("lower", "upper"):
        if key in domain:
            chart_kw[key] = rd.numbers("domain", key, n)
    try:
        chart = FoliatedChart(p, q, **chart_kw)
    except CodimensionError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[domain]: {exc}", rd.offset("domain", "lower")) from None

    gamma = {}
    for key in rd.section("connection", required=False):
        off = rd.offset("connection", key)
        match = _GAMMA_KEY.fullmatch(key)
        if not match:
            raise ConfigError(f"connection keys look like Gamma[i][k][l], got {key!r}", off)
        gamma[tuple(_indices(match.group(1), n, key, off))] = rd.expression("connection", key, p, q)

    degree = rd.integer("symbol", "degree")
    if degree < 0:
        raise ConfigError("symbol.degree must be non-negative", rd.offset("symbol", "degree"))
    symbol = {}
    for key in rd.section("symbol"):
        if key == "degree":
            continue
        off = rd.offset("symbol", key)
        match = _SYMBOL_KEY.fullmatch(key)
        if not match:
            raise ConfigError(f"symbol keys look like S[i][j]..., got {key!r}", off)
        slots = _indices(match.group(1), n, key, off)
        if len(slots) != degree:
            raise ConfigError(f"{key} has {len(slots)} indices but the degree is {degree}", off)
        gamma_idx = tuple(slots.count(i) for i in range(n))
        if gamma_idx in symbol:
            raise ConfigError(f"{key} repeats a component given earlier", off)
        symbol[gamma_idx] = rd.expression("symbol", key, p, q)

    fn = rd.section("function")
    if "f" not in fn:
        raise ConfigError("missing key 'f' in [function]")
    function = rd.expression("function", "f", p, q)

    pts = [rd.numbers("points", key, n) for key in rd.section("points")]
    if not pts:
        raise ConfigError("[points] lists no evaluation points")
    return ProblemConfig(p, q, chart, gamma, degree, symbol, function, np.array(pts))


def load_config(path: str) -> ProblemConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _emit(report: dict, path: str | None = None) -> None:
    text = json.dumps({"schema": SCHEMA, **report}, indent=2, ensure_ascii=False)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    report = validate_adapted(cfg.connection(), seed=args.seed)
    _emit({"command": "validate", **report.as_dict()})
    if not report.valid:
        print("violated: " + ", ".join(report.violations), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _foliated_problem(cfg: ProblemConfig):
    """Connection, symbol, function and points of the foliated pipeline."""
    if cfg.p == 0:
        return (
            cfg.connection(FoliatedConnection),
            cfg.symbol_field("foliated"),
            cfg.function,
            cfg.points,
        )
    conn = cfg.connection()
    return (
        induce_foliated(conn),
        quant.reduce_symbol(cfg.symbol_field()),
        quant.reduce_function(cfg.function, cfg.p, cfg.q, cfg.chart),
        cfg.points[:, cfg.p:],
    )


def cmd_quantize(args) -> int:
    cfg = load_config(args.config)
    if not 0 <= args.point < len(cfg.points):
        print(f"error: --point must lie in 0..{len(cfg.points) - 1}", file=sys.stderr)
        return EXIT_USAGE
    if args.mode == "adapted":
        conn = cfg.connection()
        symbol = cfg.symbol_field()
        symbol.require_adapted()
        cc = adapted_cartan(conn)
        fn, points = cfg.function, cfg.points
    else:
        conn, symbol, fn, points = _foliated_problem(cfg)
        cc = foliated_cartan(conn)
    point = points[args.point]
    quantizer = quant.Quantizer(cc, symbol, point)
    value = float(np.asarray(quantizer(fn)).reshape(-1)[0])
    report = {
        "command": "quantize",
        "mode": args.mode,
        "point_index": args.point,
        "point": [float(v) for v in point],
        "value": value,
    }
    if args.emit_operator:
        k = cfg.degree
        table = quant.extract_operator(quantizer, k, len(point), point)
        table.metadata.update(
            k=k,
            q=cfg.q,
            C={str(l): str(quant.coeff(k, l, cfg.q)) for l in range(k + 1)},
        )
        report["operator"] = table.as_dict()
    _emit(report)
    return EXIT_OK


def cmd_verify(args) -> int:
    names = verify.suite_names()
    if args.suite != "all" and args.suite not in names:
        print(f"error: unknown suite {args.suite!r}; valid names: all, " + ", ".join(names), file=sys.stderr)
        return EXIT_USAGE
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get(SEED_ENV, "0"))
    reports = verify.run_all(seed, names=None if args.suite == "all" else [args.suite])
    passed = all(r.passed for r in reports)
    _emit(
        {"command": "verify", "seed": seed, "passed": passed, "reports": [r.as_dict() for r in reports]},
        args.json,
    )
    if args.json:
        for r in reports:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.name} worst={r.worst:.3e} tol={r.tol:.0e}")
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="foliquant", description="Projectively invariant quantization on foliated charts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check that the connection is adapted")
    p_val.add_argument("config")
    p_val.add_argument("--seed", type=int, default=0, help="seed for the sample points")
    p_val.set_defaults(run=cmd_validate)

    p_q = sub.add_parser("quantize", help="evaluate Q(S)(f) at one point")
    p_q.add_argument("config")
    p_q.add_argument("--mode", choices=("adapted", "foliated"), default="adapted")
    p_q.add_argument("--point", type=int, default=0, help="0-based index into [points]")
    p_q.add_argument("--emit-operator", action="store_true", help="also print the operator coefficients")
    p_q.set_defaults(run=cmd_quantize)

    p_v = sub.add_parser("verify", help="run the property suites")
    p_v.add_argument("--suite", default="all", help="suite name or 'all'")
    p_v.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    p_v.add_argument("--json", metavar="PATH", help="write the JSON report here instead of stdout")
    p_v.set_defaults(run=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except (CodimensionError, AdaptednessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
