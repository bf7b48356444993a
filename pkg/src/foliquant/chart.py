"""Foliated charts, adapted and foliated connections, and adapted diffeomorphisms.

Index conventions follow :mod:`foliquant.jetgroup`: 0-based, slots
``0..p-1`` tangential and ``p..n-1`` transverse.  Christoffel arrays are
indexed ``G[..., i, k, l]`` for ``Γ^i_{kl}``; curvature arrays
``R[..., i, j, k, l]`` for ``R^i_{jkl}``.  Every field accepts points with a
trailing coordinate axis whose entries may be jets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import exprlang, taylor
from .exprlang import ScalarFieldExpr
from .taylor import Jet


class CodimensionError(ValueError):
    """Raised for a transverse dimension q different from 1 being violated."""


class AdaptednessError(ValueError):
    """Raised when an operation needs adapted or foliated data and gets something else."""


def check_codimension(q: int) -> None:
    if q == 1:
        raise CodimensionError(
            "transverse dimension q must be different from 1 (the construction divides by q - 1)"
        )
    if q < 1:
        raise CodimensionError("transverse dimension q must be at least 2")


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FoliatedChart:
    """Adapted coordinate box ``R^p x R^q``."""

    p: int
    q: int
    lower: tuple[float, ...] = None
    upper: tuple[float, ...] = None
    seed: int = 0

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("p must be non-negative")
        check_codimension(self.q)
        n = self.p + self.q
        lower = (-1.0,) * n if self.lower is None else tuple(float(v) for v in self.lower)
        upper = (1.0,) * n if self.upper is None else tuple(float(v) for v in self.upper)
        if len(lower) != n or len(upper) != n:
            raise ValueError("domain box dimension mismatch")
        if any(lo >= hi for lo, hi in zip(lower, upper)):
            raise ValueError("domain box is empty")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return self.p + self.q

    def contains(self, m, tol: float = 1e-12) -> bool:
        m = np.asarray(taylor.standard_part(m), dtype=float)
        return bool(np.all(m >= np.array(self.lower) - tol) and np.all(m <= np.array(self.upper) + tol))

    def sample_points(self, count: int = 20, seed: int | None = None, margin: float = 0.1) -> np.ndarray:
        """Deterministic interior sample points, shape ``(count, n)``."""
        rng = np.random.default_rng(self.seed if seed is None else seed)
        lo = np.array(self.lower)
        hi = np.array(self.upper)
        pad = margin * (hi - lo)
        return rng.uniform(lo + pad, hi - pad, size=(count, self.n))

    def transverse(self) -> "FoliatedChart":
        """The chart of the transverse coordinates alone (``p = 0``)."""
        return FoliatedChart(0, self.q, self.lower[self.p:], self.upper[self.p:], self.seed)

    def leaf_reference(self) -> dict[int, float]:
        """Centre of the leaf box, used to eliminate leaf variables."""
        return {i: 0.5 * (self.lower[i] + self.upper[i]) for i in range(self.p)}


def _coords(m) -> list:
    """Split a point array or jet along its trailing axis."""
    return [m[..., i] for i in range(m.shape[-1])]


def _zeros(batch: tuple, tail: tuple, depth: int):
    return Jet(np.zeros((1 << depth,) + batch + tail), depth)


def _assemble(batch, depth, entries: Mapping[tuple, Callable], coords, tail: tuple):
    """Fill an array field entry by entry; expressions share one evaluation cache."""
    out = _zeros(batch, tail, depth)
    cache: dict = {}
    seen: dict[int, Jet] = {}
    for idx, fn in entries.items():
        val = seen.get(id(fn))
        if val is None:
            raw = fn.evaluate(coords, cache) if isinstance(fn, ScalarFieldExpr) else fn(coords)
            val = seen[id(fn)] = taylor.as_jet(raw).broadcast_to(batch)
        out[(Ellipsis,) + idx] = val
    return out


def _as_point(m):
    return m if isinstance(m, Jet) else Jet.constant(np.asarray(m, dtype=float))


# ---------------------------------------------------------------------------
# connections
# ---------------------------------------------------------------------------


class Connection:
    """Torsion-free connection given by Christoffel fields on a chart.

    Either ``gamma`` maps 0-based ``(i, k, l)`` to expressions (missing
    entries are zero, ``(i, l, k)`` mirrors ``(i, k, l)`` unless given), or
    ``array_fn`` maps a point to the full Christoffel array.
    """

    kind = "generic"

    def __init__(
        self,
        chart: FoliatedChart,
        gamma: Mapping[tuple[int, int, int], ScalarFieldExpr] | None = None,
        array_fn: Callable | None = None,
    ):
        if (gamma is None) == (array_fn is None):
            raise ValueError("give exactly one of gamma or array_fn")
        self.chart = chart
        self.array_fn = array_fn
        self.gamma: dict[tuple[int, int, int], ScalarFieldExpr] | None = None
        if gamma is not None:
            n = chart.n
            full: dict[tuple[int, int, int], ScalarFieldExpr] = {}
            for (i, k, l), expr in gamma.items():
                if not all(0 <= v < n for v in (i, k, l)):
                    raise IndexError(f"Christoffel index {(i, k, l)} out of range for n = {n}")
                if isinstance(expr, str):
                    expr = exprlang.parse(expr, chart.p, chart.q)
                if (expr.p, expr.q) != (chart.p, chart.q):
                    raise ValueError("expression chart dimensions differ from the connection's chart")
                full[(i, k, l)] = expr
            for (i, k, l), expr in list(full.items()):
                full.setdefault((i, l, k), expr)
            self.gamma = {key: e for key, e in full.items() if not e.is_zero_literal()}

    @property
    def p(self) -> int:
        return self.chart.p

    @property
    def q(self) -> int:
        return self.chart.q

    @property
    def n(self) -> int:
        return self.chart.n

    def christoffel(self, m):
        """Christoffel array ``(..., n, n, n)`` at points ``m`` of shape ``(..., n)``."""
        if self.array_fn is not None:
            return self.array_fn(m)
        m = _as_point(m)
        n = self.n
        return _assemble(m.shape[:-1], m.depth, self.gamma, _coords(m), (n, n, n))

    def christoffel_with_derivative(self, m):
        """``(G, dG)`` with ``dG[..., a, i, k, l] = ∂_a Γ^i_{kl}``."""
        m = _as_point(m)
        n = self.n
        batch = m.shape[:-1]
        lifted = taylor.lift(m[..., None, :].broadcast_to(batch + (n, n)), np.eye(n))
        g = taylor.as_jet(self.christoffel(lifted), m.depth + 1)
        return taylor.truncate(g, m.depth)[..., 0, :, :, :], taylor.tangent(g, m.depth)

    def _rebuild(self, gamma=None, array_fn=None) -> "Connection":
        return type(self)(self.chart, gamma=gamma, array_fn=array_fn)


class AdaptedConnection(Connection):
    """Connection on an adapted chart meant to satisfy the adaptedness constraints."""

    kind = "adapted"


class FoliatedConnection(Connection):
    """Connection on the transverse chart; its fields depend on ``y`` only."""

    kind = "foliated"

    def __init__(self, chart: FoliatedChart, gamma=None, array_fn=None):
        if chart.p != 0:
            raise ValueError("a foliated connection lives on a transverse chart (p = 0)")
        super().__init__(chart, gamma=gamma, array_fn=array_fn)


def flat_connection(chart: FoliatedChart, kind: str = "adapted") -> Connection:
    cls = FoliatedConnection if kind == "foliated" else AdaptedConnection
    return cls(chart, gamma={})


def curvature(conn: Connection, m):
    """``R^i_{jkl} = ∂_k Γ^i_{lj} - ∂_l Γ^i_{kj} + Γ^i_{ka}Γ^a_{lj} - Γ^i_{la}Γ^a_{kj}``."""
    if not isinstance(m, Jet) and not conn.chart.contains(m):
        raise ValueError("point outside the chart domain")
    g, dg = conn.christoffel_with_derivative(m)
    d_term = taylor.as_jet(dg).transpose(*_perm_dg(dg.ndim))
    gg = taylor.einsum("...ika,...alj->...ijkl", g, g)
    out = d_term - d_term.swapaxes(-1, -2) + gg - gg.swapaxes(-1, -2)
    return out if isinstance(m, Jet) else out.std


def _perm_dg(ndim: int) -> tuple[int, ...]:
    # dG[..., k, i, l, j] -> [..., i, j, k, l]
    lead = tuple(range(ndim - 4))
    b = ndim - 4
    return lead + (b + 1, b + 3, b, b + 2)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    symmetry: float
    mixed_block: float
    x_dependence: float
    tol: float
    points: int

    @property
    def violations(self) -> list[str]:
        out = []
        if self.symmetry > self.tol:
            out.append("Γ^i_{kl}=Γ^i_{lk}")
        if self.mixed_block > self.tol:
            out.append("Γ^𝔨_{iλ}=0")
        if self.x_dependence > self.tol:
            out.append("∂_x Γ^𝔨_{𝔦𝔩}=0")
        return out

    @property
    def valid(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "valid": self.valid,
            "symmetry": self.symmetry,
            "mixed_block": self.mixed_block,
            "x_dependence": self.x_dependence,
            "violations": self.violations,
            "points": self.points,
        }


def validate_adapted(conn: Connection, samples: int = 20, seed: int | None = None, tol: float = 1e-12) -> ValidationReport:
    """Check symmetry, the vanishing mixed block and x-independence at sample points."""
    p, n = conn.p, conn.n
    pts = conn.chart.sample_points(samples, seed)
    g, dg = conn.christoffel_with_derivative(pts)
    g = g.std
    dg = dg.std
    sym = float(np.abs(g - g.swapaxes(-1, -2)).max(initial=0.0))
    mixed = 0.0
    if p:
        mixed = max(
            float(np.abs(g[:, p:, :, :p]).max(initial=0.0)),
            float(np.abs(g[:, p:, :p, :]).max(initial=0.0)),
        )
    xdep = float(np.abs(dg[:, :p, p:, p:, p:]).max(initial=0.0)) if p else 0.0
    return ValidationReport(sym, mixed, xdep, tol, samples)


def require_adapted(conn: Connection, tol: float = 1e-9) -> None:
    report = validate_adapted(conn, tol=tol)
    if not report.valid:
        raise AdaptednessError("connection is not adapted: " + ", ".join(report.violations))


# ---------------------------------------------------------------------------
# induced foliated connection
# ---------------------------------------------------------------------------


def induce_foliated(conn: Connection, check: bool = True) -> FoliatedConnection:
    """Transverse block ``Γ^{p+i}_{p+k, p+l}`` reindexed to the transverse chart."""
    if check:
        require_adapted(conn)
    p, q = conn.p, conn.q
    tchart = conn.chart.transverse()
    if conn.gamma is not None:
        ref = conn.chart.leaf_reference()
        gamma = {
            (i - p, k - p, l - p): exprlang.substitute(e, ref, 0, q)
            for (i, k, l), e in conn.gamma.items()
            if min(i, k, l) >= p
        }
        return FoliatedConnection(tchart, gamma=gamma)
    ref = np.array([conn.chart.leaf_reference()[i] for i in range(p)])

    def block(y):
        y = _as_point(y)
        x = Jet.constant(np.broadcast_to(ref, y.shape[:-1] + (p,)), y.depth)
        full = conn.christoffel(taylor.concatenate([x, y], axis=-1))
        return full[..., p:, p:, p:]

    return FoliatedConnection(tchart, array_fn=block)


# ---------------------------------------------------------------------------
# one-forms and projective shifts
# ---------------------------------------------------------------------------


class OneForm:
    """Differential one-form with ``n`` component expressions or a callable."""

    def __init__(self, chart: FoliatedChart, components: Sequence | None = None, array_fn: Callable | None = None):
        self.chart = chart
        self.array_fn = array_fn
        self.components: list[ScalarFieldExpr] | None = None
        if components is not None:
            comps = []
            for c in components:
                if isinstance(c, str):
                    c = exprlang.parse(c, chart.p, chart.q)
                elif isinstance(c, (int, float)):
                    c = exprlang.constant(c, chart.p, chart.q)
                comps.append(c)
            if len(comps) != chart.n:
                raise ValueError(f"one-form needs {chart.n} components")
            self.components = comps

    def __call__(self, m):
        if self.array_fn is not None:
            return self.array_fn(m)
        m = _as_point(m)
        return _assemble(m.shape[:-1], m.depth, {(i,): c for i, c in enumerate(self.components)}, _coords(m), (self.chart.n,))

    def is_foliated(self, samples: int = 20, tol: float = 1e-12) -> bool:
        p = self.chart.p
        pts = self.chart.sample_points(samples, seed=12345)
        vals = taylor.standard_part(self(pts))
        if np.abs(vals[:, :p]).max(initial=0.0) > tol:
            return False
        if not p:
            return True
        n = self.chart.n
        lifted = taylor.lift(Jet.constant(pts)[:, None, :].broadcast_to((samples, p, n)), np.eye(n)[:p])
        deriv = taylor.tangent(taylor.as_jet(self(lifted), 1), 0).std
        return bool(np.abs(deriv[..., p:]).max(initial=0.0) <= tol)

    def negated(self) -> "OneForm":
        if self.components is not None:
            return OneForm(self.chart, [exprlang.ScalarFieldExpr(exprlang.Neg(c.root), c.p, c.q) for c in self.components])
        fn = self.array_fn
        return OneForm(self.chart, array_fn=lambda m: -fn(m))


def projective_shift(conn: Connection, alpha: OneForm) -> Connection:
    """``Γ'^k_{il} = Γ^k_{il} + δ^k_i α_l + δ^k_l α_i``."""
    if alpha.chart.n != conn.n:
        raise ValueError("one-form dimension mismatch")
    if isinstance(conn, AdaptedConnection) and conn.p and not alpha.is_foliated():
        raise AdaptednessError("shifting an adapted connection needs a foliated one-form")
    n = conn.n
    if conn.gamma is not None and alpha.components is not None:
        gamma = dict(conn.gamma)
        zero = exprlang.constant(0.0, conn.p, conn.q)
        for k in range(n):
            for l in range(n):
                for i in range(n):
                    add = None
                    if k == i:
                        add = alpha.components[l]
                    if k == l:
                        add = alpha.components[i] if add is None else exprlang.combine("+", add, alpha.components[i])
                    if add is not None and not add.is_zero_literal():
                        gamma[(k, i, l)] = exprlang.combine("+", gamma.get((k, i, l), zero), add)
        return conn._rebuild(gamma=gamma)
    eye = np.eye(n)

    def shifted(m):
        g = taylor.as_jet(conn.christoffel(m))
        a = taylor.as_jet(alpha(m))
        delta = taylor.einsum("ki,...l->...kil", eye, a)
        return g + delta + delta.swapaxes(-1, -2)

    return conn._rebuild(array_fn=shifted)


# ---------------------------------------------------------------------------
# adapted diffeomorphisms and pushforward
# ---------------------------------------------------------------------------


class AdaptedDiffeo:
    """``x' = x'(x, y)``, ``y' = y'(y)`` with a declared inverse."""

    def __init__(self, p: int, q: int, forward: Sequence, inverse: Sequence):
        self.p = p
        self.q = q
        n = p + q
        self.forward_exprs = [exprlang.parse(e, p, q) if isinstance(e, str) else e for e in forward]
        self.inverse_exprs = [exprlang.parse(e, p, q) if isinstance(e, str) else e for e in inverse]
        if len(self.forward_exprs) != n or len(self.inverse_exprs) != n:
            raise ValueError(f"diffeomorphism needs {n} forward and {n} inverse components")
        for e in self.forward_exprs[p:]:
            if any(s < p for s in e.slots()):
                raise AdaptednessError("transverse components of an adapted diffeomorphism must depend on y only")

    @property
    def n(self) -> int:
        return self.p + self.q

    def _apply(self, exprs, m):
        m = _as_point(m)
        out = _assemble(m.shape[:-1], m.depth, {(i,): e for i, e in enumerate(exprs)}, _coords(m), (self.n,))
        return out

    def __call__(self, m):
        return self._apply(self.forward_exprs, m)

    def inverse(self, m):
        return self._apply(self.inverse_exprs, m)

    def roundtrip_error(self, points) -> float:
        pts = np.asarray(points, dtype=float)
        a = self.inverse(self(pts)).std - pts
        b = self(self.inverse(pts)).std - pts
        return float(max(np.abs(a).max(), np.abs(b).max()))


def jacobian(fn: Callable, m):
    """``J[..., a, b] = ∂ fn^a / ∂ m^b`` over the jet ring, one generator deeper internally."""
    m = _as_point(m)
    n = m.shape[-1]
    batch = m.shape[:-1]
    lifted = taylor.lift(m[..., None, :].broadcast_to(batch + (n, n)), np.eye(n))
    d = taylor.tangent(taylor.as_jet(fn(lifted), m.depth + 1), m.depth)
    # move the direction axis (right after the batch axes) to the end
    b = len(batch)
    axes = tuple(range(b)) + tuple(range(b + 1, d.ndim)) + (b,)
    return d.transpose(*axes)


def hessian(fn: Callable, m):
    """``H[..., a, b, c] = ∂² fn^a / ∂m^b ∂m^c``."""
    return jacobian(lambda z: jacobian(fn, z), m)


def pushforward(obj, phi: AdaptedDiffeo, chart: FoliatedChart | None = None):
    """Transport a connection, one-form, function or symbol field along ``phi``.

    Functions transform by composition with the inverse and symbols by the
    tangent map.  ``chart`` is the target chart (default: same box).
    """
    if hasattr(obj, "pushforward_by"):
        return obj.pushforward_by(phi, chart)
    if isinstance(obj, Connection):
        return _push_connection(obj, phi, chart or obj.chart)
    if isinstance(obj, OneForm):
        def alpha_new(xn):
            old = phi.inverse(xn)
            a = taylor.as_jet(obj(old))
            jinv = jacobian(phi.inverse, xn)
            return taylor.einsum("...b,...bk->...k", a, jinv)

        return OneForm(chart or obj.chart, array_fn=alpha_new)
    if callable(obj):
        def composed(point):
            pt = point if isinstance(point, Jet) else None
            if pt is None:
                arr = taylor.stack(list(point), axis=-1) if any(isinstance(c, Jet) for c in point) else np.stack([np.asarray(c, dtype=float) for c in point], axis=-1)
            else:
                arr = pt
            old = phi.inverse(arr)
            out = obj([old[..., i] for i in range(phi.n)])
            return out if isinstance(arr, Jet) else taylor.standard_part(out)

        return composed
    raise TypeError(f"cannot push forward {type(obj).__name__}")


def _push_connection(conn: Connection, phi: AdaptedDiffeo, chart: FoliatedChart) -> Connection:
    def gamma_new(xn):
        xn = _as_point(xn)
        old = phi.inverse(xn)
        dx = jacobian(phi.inverse, xn)  # ∂X^b/∂x'^k -> [b, k]
        ddx = hessian(phi.inverse, xn)  # ∂²X^d/∂x'^k∂x'^l -> [d, k, l]
        jfwd = jacobian(phi, old)  # ∂X'^a/∂X^d -> [a, d]
        g_old = taylor.as_jet(conn.christoffel(old))
        t1 = taylor.einsum("...dbc,...bk->...dkc", g_old, dx)
        t1 = taylor.einsum("...dkc,...cl->...dkl", t1, dx)
        return taylor.einsum("...ad,...dkl->...akl", jfwd, t1 + ddx)

    return type(conn)(chart, array_fn=gamma_new)
