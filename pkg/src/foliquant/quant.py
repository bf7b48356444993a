"""Equivariant lifts, invariant differentiation and the quantization formula.

Bundle functions are evaluated on bundle coordinates ``u`` (see
:mod:`foliquant.cartan`) and return coefficient vectors of a symmetric power
``S^k R^dim`` in the monomial basis of :mod:`foliquant.symtensor`.

Iterated invariant derivatives are computed by polarization: the map
``X -> (L_{ω^{-1}X})^r F(u)`` is a homogeneous polynomial of degree ``r`` in
``X`` whose monomial coefficients are exactly the coefficients of the
symmetrized tensor ``(∇^ω)^r F(u)``.  Sampling it at the lattice points
``γ`` with ``|γ| = r`` and solving the (unisolvent) Vandermonde system
recovers them from ``C(dim + r - 1, r)`` nested derivatives instead of
``dim**r`` ordered ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from . import exprlang, symtensor, taylor
from .cartan import (
    CartanConn,
    adapted_cartan,
    algebra_coords,
    foliated_cartan,
    fundamental_field,
    omega_inverse,
    split_point,
)
from .chart import (
    AdaptedDiffeo,
    AdaptednessError,
    Connection,
    FoliatedChart,
    _as_point,
    _assemble,
    _coords,
    check_codimension,
    jacobian,
)
from .exprlang import ScalarFieldExpr
from .jetgroup import HElement
from .symtensor import count, multi_indices
from .taylor import Jet

ScalarField = Callable  # maps a list of coordinates (reals or jets) to a value


# ---------------------------------------------------------------------------
# symbol fields
# ---------------------------------------------------------------------------


class SymbolField:
    """Degree-``k`` contravariant symmetric tensor field on a chart.

    ``components`` maps multi-indices (exponent tuples of length ``chart.n``)
    to expressions or strings; missing entries are zero.  Alternatively
    ``array_fn`` maps points to coefficient vectors.  A foliated symbol lives
    on a transverse chart (``p = 0``).
    """

    def __init__(
        self,
        chart: FoliatedChart,
        degree: int,
        components: Mapping | None = None,
        kind: str = "adapted",
        array_fn: Callable | None = None,
    ):
        if kind not in ("adapted", "foliated"):
            raise ValueError("kind must be 'adapted' or 'foliated'")
        if kind == "foliated" and chart.p != 0:
            raise ValueError("a foliated symbol lives on a transverse chart (p = 0)")
        if degree < 0:
            raise ValueError("degree must be non-negative")
        if (components is None) == (array_fn is None):
            raise ValueError("give exactly one of components or array_fn")
        self.chart = chart
        self.degree = degree
        self.kind = kind
        self.array_fn = array_fn
        self.components: dict[tuple[int, ...], ScalarFieldExpr] | None = None
        if components is not None:
            idx = symtensor.index_of(chart.n, degree)
            comps = {}
            for g, e in components.items():
                g = tuple(int(v) for v in g)
                if g not in idx:
                    raise ValueError(f"multi-index {g} does not match dim {chart.n}, degree {degree}")
                if isinstance(e, str):
                    e = exprlang.parse(e, chart.p, chart.q)
                elif isinstance(e, (int, float)):
                    e = exprlang.constant(float(e), chart.p, chart.q)
                if not e.is_zero_literal():
                    comps[g] = e
            self.components = comps

    @property
    def dim(self) -> int:
        return self.chart.n

    @property
    def size(self) -> int:
        return count(self.dim, self.degree)

    def values(self, m):
        """Coefficient vectors ``(..., size)`` at points ``m``."""
        if self.array_fn is not None:
            return self.array_fn(m)
        m = _as_point(m)
        idx = symtensor.index_of(self.dim, self.degree)
        entries = {(idx[g],): e for g, e in self.components.items()}
        out = _assemble(m.shape[:-1], m.depth, entries, _coords(m), (self.size,))
        return out if m.depth else out.std

    def at(self, m) -> symtensor.SymTensor:
        return symtensor.SymTensor(self.dim, self.degree, "contravariant", taylor.standard_part(self.values(np.asarray(m, dtype=float))))

    def x_dependence(self, samples: int = 20, seed: int = 2024) -> float:
        """Largest x-derivative of the transverse-supported components."""
        p, n = self.chart.p, self.dim
        if p == 0:
            return 0.0
        pts = self.chart.sample_points(samples, seed=seed)
        lifted = taylor.lift(Jet.constant(pts)[:, None, :].broadcast_to((samples, p, n)), np.eye(n)[:p])
        vals = taylor.as_jet(self.values(lifted), 1)
        sel = symtensor.transverse_selection(n, self.degree, p)
        return float(np.abs(taylor.tangent(vals, 0).std[..., sel]).max(initial=0.0))

    def require_adapted(self, tol: float = 1e-9) -> None:
        if self.kind == "adapted" and self.x_dependence() > tol:
            raise AdaptednessError("transverse symbol components depend on leaf coordinates")

    def pushforward_by(self, phi: AdaptedDiffeo, chart: FoliatedChart | None = None) -> "SymbolField":
        """``S'(m') = ρ(Dφ) S(φ^{-1}(m'))``."""
        dim, degree = self.dim, self.degree

        def pushed(mn):
            mn = _as_point(mn)
            old = phi.inverse(mn)
            jac = jacobian(phi, old)
            return symtensor.push_coeffs(jac, taylor.as_jet(self.values(old)), dim, degree)

        return SymbolField(chart or self.chart, degree, kind=self.kind, array_fn=pushed)


def reduce_symbol(s: SymbolField, tol: float = 1e-9) -> SymbolField:
    """Transverse-supported components on the transverse chart, leaf variables eliminated."""
    if s.kind != "adapted":
        raise ValueError("reduce_symbol expects an adapted symbol")
    s.require_adapted(tol)
    p, q, k = s.chart.p, s.chart.q, s.degree
    tchart = s.chart.transverse()
    if s.components is not None:
        ref = s.chart.leaf_reference()
        comps = {
            g[p:]: exprlang.substitute(e, ref, 0, q)
            for g, e in s.components.items()
            if not any(g[:p])
        }
        return SymbolField(tchart, k, comps, kind="foliated")
    sel = symtensor.transverse_selection(s.dim, k, p)
    ref = np.array([s.chart.leaf_reference()[i] for i in range(p)])

    def reduced(y):
        y = _as_point(y)
        x = Jet.constant(np.broadcast_to(ref, y.shape[:-1] + (p,)), y.depth)
        return taylor.as_jet(s.values(taylor.concatenate([x, y], axis=-1)))[..., sel]

    return SymbolField(tchart, k, kind="foliated", array_fn=reduced)


def reduce_function(f: ScalarField, p: int, q: int, chart: FoliatedChart | None = None) -> ScalarField:
    """Function of ``y`` alone obtained by fixing ``x`` at the leaf-box centre."""
    ref = chart.leaf_reference() if chart is not None else {i: 0.0 for i in range(p)}
    if isinstance(f, ScalarFieldExpr):
        return exprlang.substitute(f, ref, 0, q)
    xs = [ref[i] for i in range(p)]
    return lambda y: f(xs + list(y))


# ---------------------------------------------------------------------------
# equivariant bundle functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EquivariantField:
    """Bundle function with values in ``S^degree R^dim`` (``size`` extra copies allowed).

    ``evaluator`` maps bundle coordinates ``(..., N)`` to ``(..., width)``
    where ``width = count(dim, degree) * copies``; ``copies`` lets several
    functions share one evaluation.
    """

    evaluator: Callable
    degree: int
    dim: int
    copies: int = 1

    @property
    def width(self) -> int:
        return count(self.dim, self.degree) * self.copies

    def __call__(self, u):
        return self.evaluator(u)


def _function_values(fs: Sequence[ScalarField], m):
    m = _as_point(m)
    coords = _coords(m)
    batch = m.shape[:-1]
    cols = [taylor.as_jet(f(coords), m.depth).broadcast_to(batch) for f in fs]
    return taylor.stack(cols, axis=-1)


def lift_function(f, cc: CartanConn) -> EquivariantField:
    """``f̂(u) = f(π(u))``; a sequence of functions gives a vector of lifts."""
    fs = list(f) if isinstance(f, (list, tuple)) else [f]
    n = cc.n

    def evaluator(u):
        u = _as_point(u)
        out = _function_values(fs, u[..., :n])
        return out if u.depth else out.std

    return EquivariantField(evaluator, 0, n, len(fs))


def lift_symbol(s: SymbolField, cc: CartanConn) -> EquivariantField:
    """``Ŝ(σ(m)·h) = ρ(A_h^{-1}) S(m)``."""
    if s.kind != cc.kind or s.dim != cc.n:
        raise ValueError("symbol kind or dimension does not match the Cartan connection")
    p, q, k = cc.p, cc.q, s.degree

    def evaluator(u):
        u = _as_point(u)
        m, A, _ = split_point(u, p, q)
        out = symtensor.push_coeffs(taylor.inverse(A), taylor.as_jet(s.values(m)), p + q, k)
        return out if u.depth else taylor.standard_part(out)

    return EquivariantField(evaluator, k, p + q)


def rho_star(mat: np.ndarray, coeffs, dim: int, degree: int):
    """Infinitesimal action ``d/dt ρ(I + t mat)`` on contravariant coefficients."""
    gen = taylor.lift(np.eye(dim), np.asarray(mat, dtype=float))
    return taylor.tangent(symtensor.push_coeffs(gen, taylor.as_jet(coeffs), dim, degree), 0).std


def lie_fundamental(F: EquivariantField, cc: CartanConn, k) -> EquivariantField:
    """``L_{k*} F`` for an element ``k`` of the isotropy algebra (coordinates)."""
    k = np.asarray(k, dtype=float)

    def evaluator(u):
        return taylor.nested_derivative(F.evaluator, u, [lambda v: fundamental_field(cc, v, k)])

    return EquivariantField(evaluator, F.degree, F.dim, F.copies)


def grade1_element(cc: CartanConn, h) -> np.ndarray:
    """Algebra coordinates of the transverse covector ``h`` (length ``q``) in grade 1."""
    n = cc.n
    h = np.asarray(h, dtype=float)
    xi = np.concatenate([np.zeros(cc.p), h])
    return taylor.standard_part(algebra_coords(np.zeros(n), np.zeros((n, n)), xi, cc.p, cc.q))


def grade0_element(cc: CartanConn, m0) -> np.ndarray:
    n = cc.n
    return taylor.standard_part(algebra_coords(np.zeros(n), np.asarray(m0, dtype=float), np.zeros(n), cc.p, cc.q))


# ---------------------------------------------------------------------------
# polarized invariant derivatives
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _polarization(dim: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample directions and the inverse Vandermonde matrix for degree ``order``."""
    dirs = np.array(multi_indices(dim, order), dtype=float)
    vander = np.array([[np.prod(d ** np.array(g)) for g in multi_indices(dim, order)] for d in dirs])
    return dirs, np.linalg.inv(vander)


def _direction_frames(cc: CartanConn, dirs: np.ndarray, offset: int) -> np.ndarray:
    """Algebra coordinates of grade -1 elements with ``dirs`` placed from slot ``offset``."""
    out = np.zeros((len(dirs), cc.dim))
    out[:, offset: offset + dirs.shape[1]] = dirs
    return out


def polarized_derivative(F: EquivariantField, cc: CartanConn, u, order: int, transverse: bool = False):
    """Monomial coefficients of ``X -> (L_{ω^{-1}X})^order F(u)``.

    Directions range over ``R^n`` or, with ``transverse``, over the last ``q``
    slots.  Returns ``(..., count(d, order), F.width)`` with ``d`` the
    direction dimension.  ``u`` may carry jets.
    """
    d = cc.q if transverse else cc.n
    if order == 0:
        val = F.evaluator(u)
        return val[..., None, :]
    dirs, vinv = _polarization(d, order)
    frames = _direction_frames(cc, dirs, cc.p if transverse else 0)
    point = taylor.as_jet(u) if isinstance(u, Jet) else np.asarray(u, dtype=float)
    batch = point.shape[:-1]
    U = point[..., None, :]
    U = U.broadcast_to(batch + (len(dirs), point.shape[-1])) if isinstance(U, Jet) else np.broadcast_to(U, batch + (len(dirs), point.shape[-1]))
    field_fn = lambda v: omega_inverse(cc, v, frames)  # noqa: E731
    vals = taylor.nested_derivative(F.evaluator, U, [field_fn] * order)
    if isinstance(vals, Jet):
        return taylor.einsum("gd,...dw->...gw", vinv, vals)
    return np.einsum("gd,...dw->...gw", vinv, vals)


def invariant_derivative(F: EquivariantField, cc: CartanConn, u, order: int):
    """Symmetrized ``(∇^ω)^order F(u)`` as covariant coefficients ``(..., count(n, order), width)``."""
    return polarized_derivative(F, cc, u, order)


@lru_cache(maxsize=None)
def _slot_contraction(dim: int, degree: int, gamma: tuple[int, ...]) -> np.ndarray:
    """``i(ε^{j_1}) ... i(ε^{j_l})`` with one-slot insertions, ``γ`` counting the ``j``'s."""
    mat = np.eye(count(dim, degree))
    deg = degree
    for j, times in enumerate(gamma):
        for _ in range(times):
            mat = (symtensor.contraction_matrix(dim, deg, j) / deg) @ mat
            deg -= 1
    return mat


def slot_contract(eta, coeffs, dim: int, degree: int):
    """One-slot insertion ``S(η, ·, ..., ·)``; equals ``contract(η, S) / degree``."""
    return symtensor.contract_coeffs(np.asarray(eta, dtype=float), coeffs, dim, degree) / degree


def divergence(F: EquivariantField, cc: CartanConn, u, times: int = 1):
    """``(Div^ω)^times F(u)`` with ``Div^ω S = Σ_{j transverse} S(ε^j, ...)`` after ``∇^ω_{e_j}``.

    Contractions commute, so the iterate is the transverse polarized derivative
    contracted against the matching multi-index.  Returns
    ``(..., count(n, degree - times) * copies)``.
    """
    k, n, p = F.degree, cc.n, cc.p
    if times > k:
        raise ValueError("cannot take more divergences than the symbol degree")
    if times == 0:
        return F.evaluator(u)
    coeffs = polarized_derivative(F, cc, u, times, transverse=True)
    gammas = multi_indices(cc.q, times)
    mats = np.stack([_slot_contraction(n, k, (0,) * p + g) for g in gammas])
    w = count(n, k)
    shaped = coeffs.reshape(coeffs.shape[:-1] + (F.copies, w))
    if isinstance(shaped, Jet):
        out = taylor.einsum("gab,...gcb->...ca", mats, shaped)
    else:
        out = np.einsum("gab,...gcb->...ca", mats, shaped)
    return out.reshape(out.shape[:-2] + (F.copies * count(n, k - times),))


def divergence_field(F: EquivariantField, cc: CartanConn, times: int = 1) -> EquivariantField:
    return EquivariantField(lambda u: divergence(F, cc, u, times), F.degree - times, F.dim, F.copies)


# ---------------------------------------------------------------------------
# quantization
# ---------------------------------------------------------------------------


def coeff(k: int, l: int, q: int) -> Fraction:
    """``C_{k,l} = (k-1)...(k-l) / ((q+2k-1)...(q+2k-l)) * binom(k, l)``."""
    check_codimension(q)
    if not 0 <= l <= k:
        raise ValueError("need 0 <= l <= k")
    out = Fraction(math.comb(k, l))
    for j in range(1, l + 1):
        out *= Fraction(k - j, q + 2 * k - j)
    return out


class Quantizer:
    """``f -> Q(S)(f)`` at fixed base points, reusing the divergence terms.

    ``fiber`` (bundle coordinates of an H element) moves the evaluation off
    the section; the result does not depend on it.
    """

    def __init__(self, cc: CartanConn, symbol: SymbolField, points, fiber=None):
        check_codimension(cc.q)
        self.cc = cc
        self.symbol = symbol
        self.k = symbol.degree
        self.points = points if isinstance(points, Jet) else np.asarray(points, dtype=float)
        batch = self.points.shape[:-1]
        fib = HElement.identity(cc.p, cc.q).coords() if fiber is None else np.asarray(fiber, dtype=float)
        fib = np.broadcast_to(fib, batch + (fib.shape[-1],))
        if isinstance(self.points, Jet):
            self.u = taylor.concatenate([self.points, Jet.constant(fib, self.points.depth)], axis=-1)
        else:
            self.u = np.concatenate([self.points, fib], axis=-1)
        shat = lift_symbol(symbol, cc)
        self.divs = [divergence(shat, cc, self.u, l) for l in range(self.k + 1)]
        self.coefficients = [coeff(self.k, l, cc.q) for l in range(self.k + 1)]

    def many(self, fs: Sequence[ScalarField]):
        """Values ``(..., len(fs))`` at the base points (jets if the points are jets)."""
        fhat = lift_function(list(fs), self.cc)
        n, k = self.cc.n, self.k
        total = np.zeros(self.points.shape[:-1] + (len(fs),))
        for l, c in enumerate(self.coefficients):
            if c == 0:
                continue
            r = k - l
            grad = invariant_derivative(fhat, self.cc, self.u, r)  # (..., count, len(fs))
            weighted = self.divs[l] * symtensor.pairing_weights(n, r)
            total = total + float(c) * taylor.einsum("...g,...gf->...f", weighted, grad)
        return total

    def __call__(self, f: ScalarField):
        out = self.many([f])[..., 0]
        if isinstance(out, Jet):
            return out
        return float(out) if np.ndim(out) == 0 else out


def quantize(cc: CartanConn, symbol: SymbolField, f, m, fiber=None):
    """``Σ_l C_{k,l} <Div^l Ŝ, (∇^ω)^{k-l} f̂>`` at ``σ(m)`` (or ``σ(m)·fiber``)."""
    return Quantizer(cc, symbol, m, fiber)(f)


def quantize_adapted(conn: Connection, symbol: SymbolField, f, m, fiber=None, check: bool = True):
    if symbol.kind != "adapted":
        raise ValueError("quantize_adapted expects an adapted symbol")
    if check:
        symbol.require_adapted()
    return quantize(adapted_cartan(conn, check=check), symbol, f, m, fiber)


def quantize_foliated(fconn: Connection, symbol: SymbolField, f, m_y, fiber=None):
    if symbol.kind != "foliated":
        raise ValueError("quantize_foliated expects a foliated symbol")
    return quantize(foliated_cartan(fconn), symbol, f, m_y, fiber)


# ---------------------------------------------------------------------------
# operator extraction
# ---------------------------------------------------------------------------


class LinearityError(ValueError):
    """The quantizer failed the linearity spot check."""


def _monomial_probe(gamma: tuple[int, ...], base) -> ScalarField:
    base = [float(b) for b in base]
    scale = 1.0 / symtensor.factorial(gamma)

    def probe(coords):
        out = scale
        for c, b, e in zip(coords, base, gamma):
            if e:
                out = out * (c - b) ** e
        return out

    return probe


@dataclass
class OperatorTable:
    """``Q(f)(m) = Σ_γ D_γ ∂^γ f(m)`` at one base point."""

    base_point: np.ndarray
    degree: int
    dim: int
    coefficients: dict[tuple[int, ...], float]
    metadata: dict = field(default_factory=dict)

    def top(self) -> dict[tuple[int, ...], float]:
        return {g: v for g, v in self.coefficients.items() if sum(g) == self.degree}

    def apply(self, f: ScalarField) -> float:
        """Evaluate the operator on ``f`` at the base point."""
        total = 0.0
        dim = self.dim
        for g, v in self.coefficients.items():
            if v == 0.0:
                continue
            fields = []
            for j, e in enumerate(g):
                fields += [lambda z, j=j: np.eye(dim)[j]] * e
            val = taylor.nested_derivative(lambda z: f(_coords(_as_point(z))), self.base_point, fields)
            total += v * float(taylor.standard_part(val))
        return total

    def as_dict(self) -> dict:
        return {
            "base_point": [float(v) for v in self.base_point],
            "degree": self.degree,
            "coefficients": {",".join(map(str, g)): float(v) for g, v in self.coefficients.items()},
            **self.metadata,
        }


def extract_operator(quantizer, k: int, dim: int, base_point, seed: int = 0, tol: float = 1e-9) -> OperatorTable:
    """Recover ``D_γ`` from probes ``(x - m)^γ / γ!`` with ``|γ| <= k``."""
    base = np.asarray(base_point, dtype=float)
    gammas = [g for r in range(k + 1) for g in multi_indices(dim, r)]
    probes = [_monomial_probe(g, base) for g in gammas]
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(-1, 1, 2)
    i, j = rng.integers(len(probes), size=2)
    pi, pj = probes[i], probes[j]
    combo = lambda c: a * pi(c) + b * pj(c)  # noqa: E731
    if hasattr(quantizer, "many"):
        vals = np.asarray(quantizer.many(probes + [combo]), dtype=float).reshape(-1)
    else:
        vals = np.array([float(quantizer(f)) for f in probes + [combo]])
    scale = max(1.0, float(np.abs(vals).max()))
    if abs(vals[-1] - (a * vals[i] + b * vals[j])) > tol * scale:
        raise LinearityError("quantizer is not linear in the function argument")
    return OperatorTable(base, k, dim, {g: float(v) for g, v in zip(gammas, vals[:-1])})
