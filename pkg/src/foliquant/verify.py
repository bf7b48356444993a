"""Seeded property suites with residual reports.

Each suite draws random polynomial instances, evaluates one identity, and
reports its worst residual.  A suite passes when the worst residual does not
exceed the tolerance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterator

import numpy as np

from . import cartan, exprlang, jetgroup, quant, symtensor, taylor
from .cartan import CartanConn
from .chart import (
    AdaptedConnection,
    AdaptedDiffeo,
    CodimensionError,
    FoliatedChart,
    FoliatedConnection,
    OneForm,
    induce_foliated,
    projective_shift,
    pushforward,
)
from .taylor import Jet


class ConfigurationError(ValueError):
    """A suite was asked for an instance it cannot build."""


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------


def random_polynomial(rng: np.random.Generator, names: list[str], degree: int = 2, scale: float = 0.5) -> str:
    """Dense polynomial text with coefficients uniform in ``[-scale, scale]``."""
    terms = [f"{rng.uniform(-scale, scale):.6f}"]
    for d in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(names, d):
            terms.append(f"{rng.uniform(-scale, scale):.6f}*" + "*".join(combo))
    return " + ".join(terms)


def _names(p: int, q: int) -> tuple[list[str], list[str]]:
    return [f"x{i + 1}" for i in range(p)], [f"y{i + 1}" for i in range(q)]


def random_adapted_connection(p: int, q: int, rng: np.random.Generator, chart: FoliatedChart | None = None) -> AdaptedConnection:
    """Transverse block in ``y`` only, mixed block zero, tangential rows in ``(x, y)``."""
    chart = chart or FoliatedChart(p, q)
    xs, ys = _names(p, q)
    n = p + q
    gamma = {}
    for i in range(n):
        for k in range(n):
            for l in range(k, n):
                if i >= p:
                    if k >= p and l >= p:
                        gamma[(i, k, l)] = random_polynomial(rng, ys)
                else:
                    gamma[(i, k, l)] = random_polynomial(rng, xs + ys)
    return AdaptedConnection(chart, gamma=gamma)


def random_adapted_symbol(chart: FoliatedChart, degree: int, rng: np.random.Generator) -> quant.SymbolField:
    """Transverse-supported components in ``y`` only, the rest in ``(x, y)``."""
    p = chart.p
    xs, ys = _names(p, chart.q)
    comps = {}
    for g in symtensor.multi_indices(chart.n, degree):
        comps[g] = random_polynomial(rng, ys if not any(g[:p]) else xs + ys)
    return quant.SymbolField(chart, degree, comps)


def random_foliated_function(p: int, q: int, rng: np.random.Generator) -> exprlang.ScalarFieldExpr:
    _, ys = _names(p, q)
    text = random_polynomial(rng, ys, degree=3) + f" + {rng.uniform(-0.5, 0.5):.6f}*sin(y1)"
    return exprlang.parse(text, p, q)


def random_function(p: int, q: int, rng: np.random.Generator) -> exprlang.ScalarFieldExpr:
    xs, ys = _names(p, q)
    return exprlang.parse(random_polynomial(rng, xs + ys, degree=3), p, q)


def random_foliated_one_form(chart: FoliatedChart, rng: np.random.Generator) -> OneForm:
    _, ys = _names(chart.p, chart.q)
    return OneForm(chart, ["0"] * chart.p + [random_polynomial(rng, ys, degree=1) for _ in range(chart.q)])


def random_bundle_points(cc: CartanConn, count: int, rng: np.random.Generator, scale: float = 0.3) -> np.ndarray:
    ms = cc.chart.sample_points(count, seed=int(rng.integers(2**31)))
    hs = [jetgroup.random_h(rng, cc.p, cc.q, scale).coords() for _ in range(count)]
    return np.concatenate([ms, np.array(hs)], axis=-1)


def random_gl(rng: np.random.Generator, p: int, q: int, scale: float = 0.3) -> jetgroup.HElement:
    h = jetgroup.random_h(rng, p, q, scale)
    return jetgroup.HElement(h.A, np.zeros(p + q), p, q)


def naturality_diffeo(p: int, q: int) -> AdaptedDiffeo:
    """Fixed nonlinear adapted diffeomorphism with an exact inverse.

    ``y1' = y1 + c y2^2``, then ``y2' = y2 + e y1'^2``; leaf coordinates
    ``x' = x exp(a y1) + b y2^2``.  Further transverse coordinates are fixed.
    """
    c, e, a, b = 0.2, 0.15, 0.3, 0.1
    fy1 = f"(y1 + {c}*y2^2)"
    fy2 = f"(y2 + {e}*{fy1}^2)"
    iy2 = f"(y2 - {e}*y1^2)"
    iy1 = f"(y1 - {c}*{iy2}^2)"
    forward = [f"x{i + 1}*exp({a}*y1) + {b}*y2^2" for i in range(p)] + [fy1, fy2] + [f"y{j + 1}" for j in range(2, q)]
    inverse = [f"(x{i + 1} - {b}*{iy2}^2)*exp(-{a}*{iy1})" for i in range(p)] + [iy1, iy2] + [f"y{j + 1}" for j in range(2, q)]
    return AdaptedDiffeo(p, q, forward, inverse)


# ---------------------------------------------------------------------------
# specs and reports
# ---------------------------------------------------------------------------

DEFAULT_DIMS = ((0, 2), (0, 3), (1, 2), (1, 3), (2, 2), (2, 3))


@dataclass(frozen=True)
class CheckSpec:
    name: str
    seed: int = 0
    dims: tuple[tuple[int, int], ...] = DEFAULT_DIMS
    degrees: tuple[int, ...] = (0, 1, 2, 3)
    tol: float = 1e-9
    instances: int = 5
    samples: int = 20
    mutation: str | None = None


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst: float
    tol: float
    instance: str
    checks: int

    def as_dict(self) -> dict:
        return asdict(self)


MUTATIONS = ("equ3-sign",)


def _cartan(conn, spec: CheckSpec) -> CartanConn:
    kind = "foliated" if isinstance(conn, FoliatedConnection) else "adapted"
    deformation = None
    if spec.mutation == "equ3-sign":
        deformation = lambda m: cartan.deformation_tensor(conn, m, sign=-1.0)  # noqa: E731
    elif spec.mutation is not None:
        raise ConfigurationError(f"unknown mutation {spec.mutation!r}")
    return CartanConn(conn, kind, deformation)


def _rng(spec: CheckSpec, *key: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, *key])


def _connections(spec: CheckSpec) -> Iterator[tuple[int, int, int, AdaptedConnection, np.random.Generator]]:
    for p, q in spec.dims:
        for i in range(spec.instances):
            rng = _rng(spec, p, q, i)
            yield p, q, i, random_adapted_connection(p, q, rng), rng


def _desc(p: int, q: int, i: int, **extra) -> str:
    more = "".join(f", {k}={v}" for k, v in extra.items())
    return f"p={p}, q={q}, instance={i}{more}"


def _maxabs(x) -> float:
    return float(np.abs(np.asarray(x)).max(initial=0.0))


# ---------------------------------------------------------------------------
# Cartan suites
# ---------------------------------------------------------------------------

_normal_cache: dict = {}


def _normal_reports(spec: CheckSpec):
    key = (spec.seed, spec.dims, spec.instances, spec.samples, spec.mutation)
    if key not in _normal_cache:
        out = []
        for p, q, i, conn, rng in _connections(spec):
            cc = _cartan(conn, spec)
            u = random_bundle_points(cc, spec.samples, rng)
            out.append((_desc(p, q, i), cartan.check_normal(cc, u)))
        _normal_cache.clear()
        _normal_cache[key] = out
    return _normal_cache[key]


def suite_structure(spec):
    for desc, rep in _normal_reports(spec):
        yield rep.structure, desc


def suite_bianchi(spec):
    for desc, rep in _normal_reports(spec):
        yield rep.bianchi, desc


def suite_normality(spec):
    for desc, rep in _normal_reports(spec):
        yield rep.normality, desc


def suite_equ2(spec):
    """Relative error of the first-order trace response to ``Γ_F -> Γ_F - εA``."""
    eps = 1e-3
    for p, q, i, conn, rng in _connections(spec):
        cc = _cartan(conn, spec)
        n = p + q
        A = np.zeros((n, n))
        A[p:, p:] = rng.uniform(-1, 1, (q, q))
        us = cc.section_points(conn.chart.sample_points(spec.samples, seed=int(rng.integers(2**31))))
        base = cartan.normality_trace(cartan.curvature_components(cc, us).K, p)
        pert = cc.with_deformation(lambda m, d=cc.deformation: d(m) - eps * A)
        moved = cartan.normality_trace(cartan.curvature_components(pert, us).K, p)
        resp = (moved - base) / eps
        Aq = A[p:, p:]
        pred = (q - 1) * Aq + (Aq - Aq.T)
        err = max(_maxabs(resp[..., p:] - pred), _maxabs(resp[..., :p]))
        yield err / _maxabs(pred), _desc(p, q, i)


def suite_link(spec):
    """Link relation on random ``(u, ξ)``, with the grade -1 part reported alongside."""
    for p, q, i, conn, rng in _connections(spec):
        acc = _cartan(conn, spec)
        fcc = _cartan(induce_foliated(conn), spec)
        count = max(50, spec.samples)
        u = random_bundle_points(acc, count, rng)
        xi = rng.normal(size=u.shape)
        full = cartan.check_link(acc, fcc, u, xi)
        lhs = cartan.omega(acc, u, xi)[..., p:p + q]
        rhs = cartan.omega(fcc, cartan.project_bundle(u, p, q), cartan.project_bundle(xi, p, q))[..., :q]
        yield max(full, _maxabs(lhs - rhs)), _desc(p, q, i)


# ---------------------------------------------------------------------------
# equivariance suites
# ---------------------------------------------------------------------------


def _symbol_setup(spec, p, q, i, conn, rng, k):
    cc = _cartan(conn, spec)
    s = random_adapted_symbol(conn.chart, k, rng)
    shat = quant.lift_symbol(s, cc)
    u = random_bundle_points(cc, spec.samples, rng)
    return cc, shat, u


def _degrees(spec, minimum: int = 0):
    return [k for k in spec.degrees if k >= minimum]


def _transverse_project(coeffs, n: int, degree: int, p: int, copies: int = 1):
    """Keep transverse-supported coefficients along the last axis."""
    sel = symtensor.transverse_selection(n, degree, p)
    return coeffs[..., sel]


def _push_covariant(mat, coeffs, dim: int, degree: int):
    return symtensor.push_coeffs(np.swapaxes(mat, -1, -2), coeffs, dim, degree)


def suite_gonabla(spec):
    """``(∇F)(ug)(X) = ρ(g^{-1}) (∇F)(u)(gX)`` for ``g`` in GL(n, q)."""
    for p, q, i, conn, rng in _connections(spec):
        n = p + q
        for k in _degrees(spec):
            cc, shat, u = _symbol_setup(spec, p, q, i, conn, rng, k)
            g = random_gl(rng, p, q)
            ug = np.array([cartan.right_translate(x, g, p, q) for x in u])
            ginv = np.linalg.inv(g.A)
            for order in (1, 2) if k <= 1 else (1,):
                d_u = np.asarray(quant.invariant_derivative(shat, cc, u, order))  # (..., cov, val)
                d_ug = np.asarray(quant.invariant_derivative(shat, cc, ug, order))
                moved = symtensor.push_coeffs(ginv, d_u, n, k)  # value slots
                moved = np.swapaxes(_push_covariant(g.A, np.swapaxes(moved, -1, -2), n, order), -1, -2)
                yield _maxabs(d_ug - moved), _desc(p, q, i, k=k, order=order)


def suite_goinv(spec):
    """``(p Div Ŝ)(ug) = ρ'(p g^{-1}) (p Div Ŝ)(u)`` for ``g`` in GL(n, q)."""
    for p, q, i, conn, rng in _connections(spec):
        n = p + q
        for k in _degrees(spec, 1):
            cc, shat, u = _symbol_setup(spec, p, q, i, conn, rng, k)
            g = random_gl(rng, p, q)
            ug = np.array([cartan.right_translate(x, g, p, q) for x in u])
            lhs = _transverse_project(np.asarray(quant.divergence(shat, cc, ug)), n, k - 1, p)
            base = _transverse_project(np.asarray(quant.divergence(shat, cc, u)), n, k - 1, p)
            dinv = np.linalg.inv(g.A[p:, p:])
            rhs = symtensor.push_coeffs(dinv, base, q, k - 1)
            yield _maxabs(lhs - rhs), _desc(p, q, i, k=k)


def _div_commutator(shat, cc, u, h, times: int):
    """``p[L_{h*} Div^l Ŝ - Div^l L_{h*} Ŝ]`` and ``p[i(h) Div^{l-1} Ŝ]``."""
    p, q, n, k = cc.p, cc.q, cc.n, shat.degree
    hk = quant.grade1_element(cc, h)
    divl = quant.divergence_field(shat, cc, times)
    first = taylor.nested_derivative(divl.evaluator, u, [lambda v: cartan.fundamental_field(cc, v, hk)])
    second = quant.divergence(quant.lie_fundamental(shat, cc, hk), cc, u, times)
    lhs = _transverse_project(np.asarray(first) - np.asarray(second), n, k - times, p)
    prev = np.asarray(quant.divergence(shat, cc, u, times - 1))
    eta = np.concatenate([np.zeros(p), h])
    rhs = _transverse_project(quant.slot_contract(eta, prev, n, k - times + 1), n, k - times, p)
    return lhs, rhs


def suite_div1(spec):
    for p, q, i, conn, rng in _connections(spec):
        for k in _degrees(spec, 1):
            cc, shat, u = _symbol_setup(spec, p, q, i, conn, rng, k)
            h = rng.uniform(-1, 1, q)
            lhs, rhs = _div_commutator(shat, cc, u, h, 1)
            yield _maxabs(lhs - (q + 2 * k - 1) * rhs), _desc(p, q, i, k=k)


def suite_div2(spec):
    for p, q, i, conn, rng in _connections(spec):
        for k in _degrees(spec, 1):
            cc, shat, u = _symbol_setup(spec, p, q, i, conn, rng, k)
            h = rng.uniform(-1, 1, q)
            for times in range(1, min(k, 3) + 1):
                lhs, rhs = _div_commutator(shat, cc, u, h, times)
                yield _maxabs(lhs - times * (q + 2 * k - times) * rhs), _desc(p, q, i, k=k, l=times)


def suite_nablag1(spec):
    """``L_{h*}∇^k f̂ - ∇^k L_{h*} f̂ = -k(k-1) ∇^{k-1} f̂ ∨ h``."""
    for p, q, i, conn, rng in _connections(spec):
        n = p + q
        cc = _cartan(conn, spec)
        f = random_function(p, q, rng)
        fhat = quant.lift_function(f, cc)
        u = random_bundle_points(cc, spec.samples, rng)
        h = rng.uniform(-1, 1, q)
        hk = quant.grade1_element(cc, h)
        eta = np.concatenate([np.zeros(p), h])
        for order in spec.degrees:
            if order == 0:
                continue
            nab = lambda v, r=order: quant.invariant_derivative(fhat, cc, v, r)[..., 0]  # noqa: E731
            first = taylor.nested_derivative(nab, u, [lambda v: cartan.fundamental_field(cc, v, hk)])
            second = np.asarray(quant.invariant_derivative(quant.lie_fundamental(fhat, cc, hk), cc, u, order))[..., 0]
            prev = np.asarray(quant.invariant_derivative(fhat, cc, u, order - 1))[..., 0]
            prod = np.einsum("oab,...a,b->...o", symtensor.product_tensor(n, order - 1, 1), prev, eta)
            yield _maxabs(first - second + order * (order - 1) * prod), _desc(p, q, i, k=order)


def suite_invalg(spec):
    """``L_{k*} F + ρ̃_*(k) F = 0`` for lifted symbols and functions."""
    for p, q, i, conn, rng in _connections(spec):
        n = p + q
        for k in _degrees(spec):
            cc, shat, u = _symbol_setup(spec, p, q, i, conn, rng, k)
            m0 = rng.uniform(-1, 1, (n, n))
            m0[p:, :p] = 0.0
            g0 = quant.grade0_element(cc, m0)
            g1 = quant.grade1_element(cc, rng.uniform(-1, 1, q))
            lie0 = np.asarray(quant.lie_fundamental(shat, cc, g0).evaluator(u))
            act = quant.rho_star(m0, np.asarray(shat.evaluator(u)), n, k)
            lie1 = np.asarray(quant.lie_fundamental(shat, cc, g1).evaluator(u))
            fhat = quant.lift_function(random_function(p, q, rng), cc)
            lief = np.asarray(quant.lie_fundamental(fhat, cc, g0 + g1).evaluator(u))
            yield max(_maxabs(lie0 + act), _maxabs(lie1), _maxabs(lief)), _desc(p, q, i, k=k)


def suite_prop_inv(spec):
    """For foliated ``f``, covariant slots of ``∇^r f̂`` along tangential directions vanish."""
    for p, q, i, conn, rng in _connections(spec):
        if p == 0:
            continue
        n = p + q
        cc = _cartan(conn, spec)
        fhat = quant.lift_function(random_foliated_function(p, q, rng), cc)
        u = random_bundle_points(cc, spec.samples, rng)
        for order in spec.degrees:
            if order == 0:
                continue
            coeffs = np.asarray(quant.invariant_derivative(fhat, cc, u, order))[..., 0]
            keep = set(symtensor.transverse_selection(n, order, p).tolist())
            drop = [j for j in range(coeffs.shape[-1]) if j not in keep]
            yield _maxabs(coeffs[..., drop]), _desc(p, q, i, k=order)


def suite_remark_pairing(spec):
    """``<Div^l Ŝ, ∇^{k-l} f̂> = <p Div^l Ŝ, p ∇^{k-l} f̂>`` for foliated ``f``."""
    for p, q, i, conn, rng in _connections(spec):
        n = p + q
        for k in _degrees(spec):
            cc, shat, u = _symbol_setup(spec, p, q, i, conn, rng, k)
            fhat = quant.lift_function(random_foliated_function(p, q, rng), cc)
            for l in range(k + 1):
                r = k - l
                div = np.asarray(quant.divergence(shat, cc, u, l))
                grad = np.asarray(quant.invariant_derivative(fhat, cc, u, r))[..., 0]
                full = np.einsum("...g,...g,g->...", div, grad, symtensor.pairing_weights(n, r))
                sel = symtensor.transverse_selection(n, r, p)
                proj = np.einsum("...g,...g,g->...", div[..., sel], grad[..., sel], symtensor.pairing_weights(q, r))
                yield _maxabs(full - proj), _desc(p, q, i, k=k, l=l)


# ---------------------------------------------------------------------------
# quantization suites
# ---------------------------------------------------------------------------


def _quant_instances(spec):
    for p, q, i, conn, rng in _connections(spec):
        for k in spec.degrees:
            s = random_adapted_symbol(conn.chart, k, rng)
            f = random_foliated_function(p, q, rng)
            m = conn.chart.sample_points(spec.samples, seed=int(rng.integers(2**31)))
            yield p, q, i, k, conn, s, f, m, rng


def suite_fiber_independence(spec):
    for p, q, i, k, conn, s, f, m, rng in _quant_instances(spec):
        cc = _cartan(conn, spec)
        base = quant.quantize(cc, s, f, m)
        h = jetgroup.random_h(rng, p, q, 0.4)
        yield _maxabs(quant.quantize(cc, s, f, m, fiber=h.coords()) - base), _desc(p, q, i, k=k)


def suite_principal_symbol(spec):
    for p, q, i, k, conn, s, f, m, rng in _quant_instances(spec):
        cc = _cartan(conn, spec)
        worst = 0.0
        for point in m[: max(1, min(len(m), 3))]:
            table = quant.extract_operator(quant.Quantizer(cc, s, point), k, p + q, point)
            comps = s.at(point).as_dict()
            worst = max(worst, max(abs(v - comps[g]) for g, v in table.top().items()))
        yield worst, _desc(p, q, i, k=k)


def suite_k0(spec):
    for p, q, i, conn, rng in _connections(spec):
        cc = _cartan(conn, spec)
        s = random_adapted_symbol(conn.chart, 0, rng)
        f = random_function(p, q, rng)
        m = conn.chart.sample_points(spec.samples, seed=int(rng.integers(2**31)))
        exact = s.values(m)[..., 0] * np.array([f(list(x)) for x in m])
        yield _maxabs(quant.quantize(cc, s, f, m) - exact), _desc(p, q, i)


def suite_k1(spec):
    """``Q(S)(f) = S^i ∂_i f`` against central differences."""
    step = 1e-5
    for p, q, i, conn, rng in _connections(spec):
        n = p + q
        cc = _cartan(conn, spec)
        s = random_adapted_symbol(conn.chart, 1, rng)
        f = random_function(p, q, rng)
        m = conn.chart.sample_points(spec.samples, seed=int(rng.integers(2**31)))
        grads = np.array([[(f(list(x + step * e)) - f(list(x - step * e))) / (2 * step) for e in np.eye(n)] for x in m])
        exact = np.einsum("...i,...i->...", s.values(m), grads)
        yield _maxabs(quant.quantize(cc, s, f, m) - exact), _desc(p, q, i)


def suite_projective_invariance(spec):
    for p, q, i, k, conn, s, f, m, rng in _quant_instances(spec):
        base = quant.quantize(_cartan(conn, spec), s, f, m)
        worst = 0.0
        for _ in range(5):
            shifted = projective_shift(conn, random_foliated_one_form(conn.chart, rng))
            worst = max(worst, _maxabs(quant.quantize(_cartan(shifted, spec), s, f, m) - base))
        yield worst, _desc(p, q, i, k=k)


def suite_naturality(spec):
    """Pushed data quantize to the pushed operator: ``Q'(f∘φ^{-1})(φ(m)) = Q(f)(m)``."""
    for p, q, i, k, conn, s, f, m, rng in _quant_instances(spec):
        phi = naturality_diffeo(p, q)
        target = FoliatedChart(p, q, (-3.0,) * (p + q), (3.0,) * (p + q))
        conn2 = pushforward(conn, phi, target)
        s2 = pushforward(s, phi, target)
        f2 = pushforward(f, phi, target)
        m2 = phi(m).std
        base = quant.quantize(_cartan(conn, spec), s, f, m)
        moved = quant.quantize(_cartan(conn2, spec), s2, f2, m2)
        yield _maxabs(moved - base), _desc(p, q, i, k=k)


def suite_foliatedness(spec):
    """x-derivatives of ``m -> Q(S)(f)(m)`` for adapted ``S`` and foliated ``f``."""
    for p, q, i, k, conn, s, f, m, rng in _quant_instances(spec):
        if p == 0:
            continue
        n = p + q
        cc = _cartan(conn, spec)
        pts = np.broadcast_to(m[:, None, :], (len(m), p, n))
        lifted = taylor.lift(pts, np.eye(n)[:p])
        out = quant.Quantizer(cc, s, lifted)(f)
        yield _maxabs(taylor.tangent(taylor.as_jet(out), 0).std), _desc(p, q, i, k=k)


def suite_commutation(spec):
    for p, q, i, k, conn, s, f, m, rng in _quant_instances(spec):
        adapted = quant.quantize(_cartan(conn, spec), s, f, m)
        fconn = induce_foliated(conn)
        reduced = quant.quantize(
            _cartan(fconn, spec),
            quant.reduce_symbol(s),
            quant.reduce_function(f, p, q, conn.chart),
            m[:, p:],
        )
        yield _maxabs(adapted - reduced), _desc(p, q, i, k=k)


def suite_p0_consistency(spec):
    """Adapted pipeline with ``p = 0`` against the foliated pipeline on the same data."""
    for p, q, i, k, conn, s, f, m, rng in _quant_instances(spec):
        if p != 0:
            continue
        chart = conn.chart
        fconn = FoliatedConnection(chart, gamma=dict(conn.gamma))
        fs = quant.SymbolField(chart, k, dict(s.components), kind="foliated")
        adapted = quant.quantize_adapted(conn, s, f, m)
        foliated = quant.quantize_foliated(fconn, fs, f, m)
        yield _maxabs(adapted - foliated), _desc(p, q, i, k=k)


def suite_q1_rejection(spec):
    """Every q = 1 entry point must raise the codimension error."""
    attempts: list[Callable] = [
        lambda: FoliatedChart(1, 1),
        lambda: FoliatedChart(0, 1),
        lambda: quant.coeff(2, 1, 1),
        lambda: cartan.deformation_from_curvature(np.zeros((2, 2, 2, 2)), 1, 1),
    ]
    for j, attempt in enumerate(attempts):
        try:
            attempt()
        except CodimensionError as err:
            ok = "different from 1" in str(err)
            yield (0.0 if ok else math.inf), f"attempt={j}"
        else:
            yield math.inf, f"attempt={j} accepted q = 1"


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

SMALL_DIMS = ((0, 2), (1, 2), (0, 3))


@dataclass(frozen=True)
class SuiteEntry:
    run: Callable
    defaults: dict = field(default_factory=dict)


REGISTRY: dict[str, SuiteEntry] = {
    "structure-equation": SuiteEntry(suite_structure, {"tol": 1e-9}),
    "bianchi": SuiteEntry(suite_bianchi, {"tol": 1e-9}),
    "normality": SuiteEntry(suite_normality, {"tol": 1e-9}),
    "equ2-linear-response": SuiteEntry(suite_equ2, {"tol": 1e-6, "samples": 5}),
    "link": SuiteEntry(suite_link, {"tol": 1e-9}),
    "gonabla": SuiteEntry(suite_gonabla, {"tol": 1e-8}),
    "goinv": SuiteEntry(suite_goinv, {"tol": 1e-8}),
    "div1": SuiteEntry(suite_div1, {"tol": 1e-8}),
    "div2": SuiteEntry(suite_div2, {"tol": 1e-8}),
    "nablag1": SuiteEntry(suite_nablag1, {"tol": 1e-8, "dims": SMALL_DIMS, "degrees": (1, 2, 3, 4)}),
    "Invalg": SuiteEntry(suite_invalg, {"tol": 1e-8}),
    "Prop-inv": SuiteEntry(suite_prop_inv, {"tol": 1e-8}),
    "remark-pairing": SuiteEntry(suite_remark_pairing, {"tol": 1e-8}),
    "fiber-independence": SuiteEntry(suite_fiber_independence, {"tol": 1e-8}),
    "principal-symbol": SuiteEntry(suite_principal_symbol, {"tol": 1e-8, "samples": 3}),
    "k0-multiplication": SuiteEntry(suite_k0, {"tol": 1e-12}),
    "k1-derivation": SuiteEntry(suite_k1, {"tol": 1e-5}),
    "projective-invariance": SuiteEntry(suite_projective_invariance, {"tol": 1e-7}),
    "naturality-pushforward": SuiteEntry(suite_naturality, {"tol": 1e-7}),
    "foliatedness-of-output": SuiteEntry(suite_foliatedness, {"tol": 1e-8}),
    "commutation": SuiteEntry(suite_commutation, {"tol": 1e-8}),
    "p0-consistency": SuiteEntry(suite_p0_consistency, {"tol": 1e-10}),
    "q1-rejection": SuiteEntry(suite_q1_rejection, {"tol": 0.0}),
}


def suite_names() -> list[str]:
    return list(REGISTRY)


def default_spec(name: str, seed: int = 0, **overrides) -> CheckSpec:
    if name not in REGISTRY:
        raise KeyError(name)
    return CheckSpec(name=name, seed=seed, **{**REGISTRY[name].defaults, **overrides})


def run_suite(spec: CheckSpec) -> CheckReport:
    if spec.name not in REGISTRY:
        raise KeyError(f"unknown suite {spec.name!r}; valid names: {', '.join(REGISTRY)}")
    if spec.name != "q1-rejection" and any(q < 2 for _, q in spec.dims):
        raise ConfigurationError("suites need q >= 2; q = 1 is covered by 'q1-rejection'")
    worst, where, checks = -1.0, "", 0
    for residual, desc in REGISTRY[spec.name].run(spec):
        checks += 1
        residual = float(residual) if np.isfinite(residual) else math.inf
        if not residual <= worst:
            worst, where = residual, desc
    worst = max(worst, 0.0)
    return CheckReport(spec.name, checks > 0 and worst <= spec.tol, worst, spec.tol, where, checks)


def run_all(seed: int = 0, mutation: str | None = None, names: list[str] | None = None) -> list[CheckReport]:
    return [run_suite(default_spec(name, seed, mutation=mutation)) for name in (names or suite_names())]
