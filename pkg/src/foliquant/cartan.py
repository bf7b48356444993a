"""Normal Cartan connections on the trivialized bundle ``W x H``.

A bundle point is a coordinate vector ``u = (m, A-entries, alpha'')`` with
the ``A`` entries listed in :func:`foliquant.jetgroup.gl_pattern` order.  A
Lie algebra element is the coordinate vector ``(v, m0-entries, xi'')``.  With
these coordinates ``ω_u`` is an ``N x N`` matrix, ``N = n + dim H``.

On the section ``h = 1`` the connection reads

* grade -1: ``dX``;
* grade 0: ``Γ^i_{jk} dX^k``;
* grade 1: ``-Γ_F[j, k] dX^k`` with ``Γ_F`` the deformation tensor,

and elsewhere ``ω_(m,h) = Ad(h^{-1}) ω_(m,1) + h^{-1} dh``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import jetgroup, taylor
from .chart import (
    AdaptedConnection,
    Connection,
    FoliatedConnection,
    check_codimension,
    curvature,
    induce_foliated,
    require_adapted,
)
from .jetgroup import HElement, Jet2Frame, LieG, gl_pattern
from .taylor import Jet


# ---------------------------------------------------------------------------
# deformation tensor
# ---------------------------------------------------------------------------


def trace_parts(R, p: int):
    """``T[j, l] = Σ_i R^i_{jil}`` and ``U[j, l] = Σ_i R^i_{ijl}`` over transverse ``i``."""
    n = R.shape[-1]
    sel = np.zeros(n)
    sel[p:] = 1.0
    T = taylor.einsum("...ijil,i->...jl", R, sel) if isinstance(R, Jet) else np.einsum("...ijil,i->...jl", R, sel)
    U = taylor.einsum("...iijl,i->...jl", R, sel) if isinstance(R, Jet) else np.einsum("...iijl,i->...jl", R, sel)
    return T, U


def deformation_from_curvature(R, p: int, q: int, sign: float = 1.0):
    """Deformation tensor from the curvature of the connection-induced Cartan connection.

    Transverse rows and columns:
    ``Γ_F[j, k] = -U[j, k] / ((q+1)(q-1)) + T[j, k] / (q-1)``;
    transverse rows and tangential columns: ``Γ_F[j, k] = T[j, k] / (q+1)``;
    tangential rows vanish.  ``sign`` exists only for mutation testing.
    """
    check_codimension(q)
    T, U = trace_parts(R, p)
    n = p + q
    tr = np.zeros((n, n))
    tr[p:, p:] = 1.0
    mixed = np.zeros((n, n))
    mixed[p:, :p] = 1.0
    main = (-U / ((q + 1) * (q - 1)) + T / (q - 1)) * (sign * tr)
    return main + T * (mixed / (q + 1))


def deformation_tensor(conn: Connection, m, sign: float = 1.0):
    """``Γ_F(m)`` for an adapted (or, with ``p = 0``, foliated) connection."""
    return deformation_from_curvature(curvature(conn, m), conn.p, conn.q, sign)


# ---------------------------------------------------------------------------
# bundle coordinates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BundlePoint:
    """``u = σ(m) · h``."""

    m: np.ndarray
    h: HElement

    def coords(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.m, dtype=float), self.h.coords()])

    @classmethod
    def from_coords(cls, u, p: int, q: int) -> "BundlePoint":
        u = np.asarray(u, dtype=float)
        n = p + q
        return cls(u[:n].copy(), HElement.from_coords(u[n:], p, q))


@lru_cache(maxsize=None)
def _pattern_arrays(p: int, q: int):
    pat = gl_pattern(p, q)
    rows = np.array([r for r, _ in pat], dtype=int)
    cols = np.array([c for _, c in pat], dtype=int)
    return rows, cols


@lru_cache(maxsize=None)
def _pattern_selector(p: int, q: int) -> np.ndarray:
    rows, cols = _pattern_arrays(p, q)
    n = p + q
    sel = np.zeros((len(rows), n, n))
    sel[np.arange(len(rows)), rows, cols] = 1.0
    return sel


def split_point(u, p: int, q: int):
    """``(m, A, alpha)`` from bundle coordinates (jets allowed)."""
    n = p + q
    u = u if isinstance(u, Jet) else Jet.constant(np.asarray(u, dtype=float))
    rows, cols = _pattern_arrays(p, q)
    batch = u.shape[:-1]
    npat = len(rows)
    A = Jet(np.zeros((1 << u.depth,) + batch + (n, n)), u.depth)
    A.c[(Ellipsis, rows, cols)] = u.c[..., n: n + npat]
    alpha = Jet(np.zeros((1 << u.depth,) + batch + (n,)), u.depth)
    alpha.c[..., p:] = u.c[..., n + npat:]
    return u[..., :n], A, alpha


def algebra_coords(v, m0, xi, p: int, q: int):
    """Stack graded parts into coordinate vectors (jets allowed)."""
    rows, cols = _pattern_arrays(p, q)
    m0 = taylor.as_jet(m0)
    parts = [taylor.as_jet(v), Jet(m0.c[..., rows, cols], m0.depth), taylor.as_jet(xi)[..., p:]]
    return taylor.concatenate(parts, axis=-1)


def algebra_parts(a, p: int, q: int):
    """Inverse of :func:`algebra_coords`; returns ``(v, m0, xi)`` arrays or jets."""
    n = p + q
    rows, cols = _pattern_arrays(p, q)
    a = taylor.as_jet(a)
    batch = a.shape[:-1]
    m0 = Jet(np.zeros((1 << a.depth,) + batch + (n, n)), a.depth)
    m0.c[(Ellipsis, rows, cols)] = a.c[..., n: n + len(rows)]
    xi = Jet(np.zeros((1 << a.depth,) + batch + (n,)), a.depth)
    xi.c[..., p:] = a.c[..., n + len(rows):]
    return a[..., :n], m0, xi


# ---------------------------------------------------------------------------
# the Cartan connection
# ---------------------------------------------------------------------------


class CartanConn:
    """Normal Cartan connection attached to a torsion-free connection.

    ``deformation`` maps base points to ``Γ_F``; it defaults to the normal
    choice and may be overridden to build perturbed (non-normal) forms.
    """

    def __init__(self, conn: Connection, kind: str, deformation: Callable | None = None):
        check_codimension(conn.q)
        if kind not in ("adapted", "foliated"):
            raise ValueError("kind must be 'adapted' or 'foliated'")
        if kind == "foliated" and conn.p != 0:
            raise ValueError("a foliated Cartan connection lives on the transverse chart")
        self.conn = conn
        self.kind = kind
        self.deformation = deformation or (lambda m: deformation_tensor(conn, m))

    @property
    def p(self) -> int:
        return self.conn.p

    @property
    def q(self) -> int:
        return self.conn.q

    @property
    def n(self) -> int:
        return self.conn.n

    @property
    def dim(self) -> int:
        return jetgroup.algebra_dim(self.p, self.q)

    @property
    def chart(self):
        return self.conn.chart

    def with_deformation(self, deformation: Callable) -> "CartanConn":
        return CartanConn(self.conn, self.kind, deformation)

    def section_point(self, m, h: HElement | None = None) -> np.ndarray:
        h = h or HElement.identity(self.p, self.q)
        return BundlePoint(np.asarray(m, dtype=float), h).coords()

    def section_points(self, ms) -> np.ndarray:
        ms = np.asarray(ms, dtype=float)
        ident = HElement.identity(self.p, self.q).coords()
        return np.concatenate([ms, np.broadcast_to(ident, ms.shape[:-1] + ident.shape)], axis=-1)


def adapted_cartan(conn: AdaptedConnection, check: bool = True, deformation: Callable | None = None) -> CartanConn:
    if check and conn.p:
        require_adapted(conn)
    return CartanConn(conn, "adapted", deformation)


def foliated_cartan(fconn: FoliatedConnection, deformation: Callable | None = None) -> CartanConn:
    """The same construction with ``p = 0`` on the transverse chart."""
    return CartanConn(fconn, "foliated", deformation)


def canonical_section(conn: Connection, m) -> Jet2Frame:
    """``σ(m) = (X(m), δ, -Γ(m))``."""
    m = np.asarray(m, dtype=float)
    g = taylor.standard_part(conn.christoffel(m))
    return Jet2Frame(m.copy(), np.eye(conn.n), -g)


def omega_matrix(cc: CartanConn, u) -> Jet:
    """Matrix of ``ω_u`` from bundle-tangent coordinates to algebra coordinates."""
    p, q, n = cc.p, cc.q, cc.n
    m, A, alpha = split_point(u, p, q)
    Ainv = taylor.inverse(A)
    G = taylor.as_jet(cc.conn.christoffel(m))
    GF = taylor.as_jet(cc.deformation(m))
    depth = taylor.depth_of(m, A, G, GF)
    batch = m.shape[:-1]

    # base directions e_k, stacked on a new axis before the matrix axes
    v = Jet.constant(np.broadcast_to(np.eye(n), batch + (n, n)), depth)
    m0 = G.transpose(*range(len(batch)), len(batch) + 2, len(batch), len(batch) + 1)
    xi = -GF.swapaxes(-1, -2)
    A_, Ainv_, al_ = A[..., None, :, :], Ainv[..., None, :, :], alpha[..., None, :]
    w, g0, g1 = jetgroup.ad_inverse_parts(A_, Ainv_, al_, v, m0, xi)
    base_cols = algebra_coords(w, g0, g1, p, q)  # (..., n, N)

    # fiber directions: dA = E_rc, then dalpha_j
    sel = _pattern_selector(p, q)  # sel[a, r, c] = 1 for pattern entry a = (r, c)
    npat = sel.shape[0]
    fib0 = taylor.einsum("...ir,arc->...aic", Ainv, sel)
    alpha_ainv = (alpha[..., None, :] @ Ainv)[..., 0, :]
    fib1 = -taylor.einsum("...r,arc->...ac", alpha_ainv, sel)
    fib_cols = algebra_coords(Jet(np.zeros((1 << fib0.depth,) + batch + (npat, n)), fib0.depth), fib0, fib1, p, q)
    nalg = cc.dim
    alpha_cols = Jet(np.zeros((1 << depth,) + batch + (q, nalg)), depth)
    alpha_cols.c[0][(Ellipsis, np.arange(q), nalg - q + np.arange(q))] = 1.0

    cols_all = taylor.concatenate([base_cols, fib_cols, alpha_cols], axis=-2)
    return cols_all.swapaxes(-1, -2)


def omega(cc: CartanConn, u, xi):
    """``ω_u(ξ)`` in algebra coordinates."""
    mat = omega_matrix(cc, u)
    out = (mat @ taylor.as_jet(xi)[..., None])[..., 0]
    return out if isinstance(u, Jet) or isinstance(xi, Jet) else out.std


def omega_inverse(cc: CartanConn, u, a):
    """Bundle tangent vector ``ξ`` with ``ω_u(ξ) = a``."""
    mat = omega_matrix(cc, u)
    out = taylor.linear_solve(mat, taylor.as_jet(a, mat.depth).broadcast_to(mat.shape[:-1]))
    return out if isinstance(u, Jet) or isinstance(a, Jet) else out.std


def fundamental_field(cc: CartanConn, u, k):
    """``k*`` at ``u``: the derivative of ``u · exp(t k)`` at ``t = 0``."""
    p, q, n = cc.p, cc.q, cc.n
    _, A, alpha = split_point(u, p, q)
    _, m0, xi = algebra_parts(k, p, q)
    dA = A @ m0
    dal = (alpha[..., None, :] @ m0)[..., 0, :] + xi
    rows, cols = _pattern_arrays(p, q)
    batch = dA.shape[:-2]
    depth = dA.depth
    zero = Jet(np.zeros((1 << depth,) + batch + (n,)), depth)
    out = taylor.concatenate([zero, Jet(dA.c[..., rows, cols], depth), taylor.as_jet(dal, depth)[..., p:]], axis=-1)
    return out if isinstance(u, Jet) or isinstance(k, Jet) else out.std


def right_translate(u, h: HElement, p: int, q: int) -> np.ndarray:
    """``u · h`` for real bundle coordinates."""
    bp = BundlePoint.from_coords(u, p, q)
    return BundlePoint(bp.m, bp.h @ h).coords()


# ---------------------------------------------------------------------------
# curvature and checks
# ---------------------------------------------------------------------------


@dataclass
class CurvatureComponents:
    torsion: np.ndarray  # [..., i, k, l]
    K: np.ndarray  # [..., i, j, k, l]
    grade1: np.ndarray  # [..., j, k, l]


def _basis_pairs(cc: CartanConn, batch: tuple):
    n, N = cc.n, cc.dim
    X = np.zeros(batch + (n, n, N))
    Y = np.zeros(batch + (n, n, N))
    for k in range(n):
        X[..., k, :, k] = 1.0
        Y[..., :, k, k] = 1.0
    return X, Y


def curvature_components(cc: CartanConn, u) -> CurvatureComponents:
    """``Ω(ω^{-1} e_k, ω^{-1} e_l) = -ω([ω^{-1} e_k, ω^{-1} e_l])`` split by grade.

    Along the frames ``V = ω^{-1}(X)`` the terms ``V(ω(W))`` vanish and
    ``[X, Y] = 0`` for ``X, Y`` in grade -1, so only the bracket term remains.
    """
    u = np.asarray(u, dtype=float)
    n, p, q = cc.n, cc.p, cc.q
    batch = u.shape[:-1]
    U = np.broadcast_to(u[..., None, None, :], batch + (n, n, u.shape[-1]))
    X, Y = _basis_pairs(cc, batch)
    V = omega_inverse(cc, U, X)
    W = omega_inverse(cc, U, Y)
    dW_V = taylor.tangent(omega_inverse(cc, taylor.lift(U, V), Y), 0).std
    dV_W = taylor.tangent(omega_inverse(cc, taylor.lift(U, W), X), 0).std
    om = -omega(cc, U, dW_V - dV_W)
    v, m0, xi = algebra_parts(om, p, q)
    K = np.moveaxis(m0.std, (-4, -3), (-2, -1))  # [.., k, l, i, j] -> [.., i, j, k, l]
    torsion = np.moveaxis(v.std, -1, -3)  # [.., k, l, i] -> [.., i, k, l]
    grade1 = np.moveaxis(xi.std, -1, -3)
    return CurvatureComponents(torsion, K, grade1)


@dataclass
class NormalityReport:
    normality: float
    structure: float
    bianchi: float

    def worst(self) -> float:
        return max(self.normality, self.structure, self.bianchi)


def normality_trace(K: np.ndarray, p: int) -> np.ndarray:
    """``Σ_{i transverse} K^i_{jil}`` for transverse ``j`` and all ``l``."""
    T, _ = trace_parts(K, p)
    return T[..., p:, :]


def bianchi_residual(K: np.ndarray) -> np.ndarray:
    """``K^i_{jkl} + K^i_{klj} + K^i_{ljk}``."""
    return K + np.moveaxis(K, (-3, -2, -1), (-1, -3, -2)) + np.moveaxis(K, (-3, -2, -1), (-2, -1, -3))


def check_normal(cc: CartanConn, u) -> NormalityReport:
    comps = curvature_components(cc, u)
    return NormalityReport(
        float(np.abs(normality_trace(comps.K, cc.p)).max(initial=0.0)),
        float(np.abs(comps.torsion).max(initial=0.0)),
        float(np.abs(bianchi_residual(comps.K)).max(initial=0.0)),
    )


# ---------------------------------------------------------------------------
# link between the adapted and foliated connections
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _link_maps(p: int, q: int):
    """Index arrays for the projection of bundle and algebra coordinates."""
    n = p + q
    pat = gl_pattern(p, q)
    fpat = gl_pattern(0, q)
    pos = {rc: i for i, rc in enumerate(pat)}
    d_block = [pos[(r + p, c + p)] for r, c in fpat]
    npat = len(pat)
    bundle = list(range(p, n)) + [n + i for i in d_block] + [n + npat + j for j in range(q)]
    return np.array(bundle, dtype=int), np.array(bundle, dtype=int)


def project_bundle(u, p: int, q: int):
    """``(y(m), D, alpha'')`` in foliated bundle coordinates; same map on tangents."""
    idx, _ = _link_maps(p, q)
    return u[..., idx]


def project_algebra(a, p: int, q: int):
    """Graded projection: transverse ``v``, the ``D`` block of ``m0``, and ``xi''``."""
    _, idx = _link_maps(p, q)
    return a[..., idx]


def check_link(acc: CartanConn, fcc: CartanConn, u, xi) -> float:
    """``max |p(ω_F(ξ)) - ω(F)(p_* ξ)|`` over the given points and directions."""
    if acc.kind != "adapted" or fcc.kind != "foliated" or fcc.q != acc.q:
        raise ValueError("check_link needs an adapted and a matching foliated Cartan connection")
    p, q = acc.p, acc.q
    lhs = project_algebra(omega(acc, u, xi), p, q)
    rhs = omega(fcc, project_bundle(np.asarray(u), p, q), project_bundle(np.asarray(xi), p, q))
    return float(np.abs(lhs - rhs).max(initial=0.0))


def induced_pair(conn: AdaptedConnection) -> tuple[CartanConn, CartanConn]:
    """Adapted normal Cartan connection and the foliated one of the induced connection."""
    return adapted_cartan(conn), foliated_cartan(induce_foliated(conn))
