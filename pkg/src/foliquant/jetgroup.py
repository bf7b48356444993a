"""Second-order jet groups, the subgroup H and the graded Lie algebra.

Conventions used throughout the package:

* indices are 0-based; slots ``0..p-1`` are tangential, ``p..n-1`` transverse;
* an element of H is the matrix ``[[A, 0], [alpha, 1]]`` with ``A`` block
  upper triangular (the transverse-row, tangential-column block vanishes) and
  ``alpha`` supported on transverse slots;
* a Lie algebra element ``(v, m0, xi)`` is realized as ``[[m0, v], [xi, 0]]``
  inside ``gl(n+1)`` modulo scalar matrices.  After every product the
  bottom-right entry is absorbed into the identity so it reads 0 again.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class SubalgebraError(ValueError):
    """A bracket or adjoint produced an element outside the graded subalgebra."""


@lru_cache(maxsize=None)
def gl_pattern(p: int, q: int) -> tuple[tuple[int, int], ...]:
    """Entries ``(row, col)`` allowed in gl(n, q): all but transverse-row, tangential-col."""
    n = p + q
    return tuple((r, c) for r in range(n) for c in range(n) if not (r >= p and c < p))


def fiber_dim(p: int, q: int) -> int:
    """Dimension of H: ``p^2 + pq + q^2 + q``."""
    return len(gl_pattern(p, q)) + q


def algebra_dim(p: int, q: int) -> int:
    return p + q + fiber_dim(p, q)


# ---------------------------------------------------------------------------
# second-order frames and the jet group
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Jet2Frame:
    """Second-order frame ``(X, B, T)``: 2-jet at 0 of ``z -> X + Bz + T(z, z)/2``."""

    base: np.ndarray
    lin: np.ndarray
    quad: np.ndarray


@dataclass(frozen=True)
class G2Element:
    """2-jet at 0 of a local diffeomorphism fixing 0: linear part and Hessian."""

    lin: np.ndarray
    quad: np.ndarray

    @classmethod
    def identity(cls, n: int) -> "G2Element":
        return cls(np.eye(n), np.zeros((n, n, n)))

    def __matmul__(self, other: "G2Element") -> "G2Element":
        # jet of the composite self ∘ other
        lin = self.lin @ other.lin
        quad = np.einsum("ia,akl->ikl", self.lin, other.quad) + np.einsum(
            "iab,ak,bl->ikl", self.quad, other.lin, other.lin
        )
        return G2Element(lin, quad)


def act(frame: Jet2Frame, g: G2Element) -> Jet2Frame:
    """Right action ``(X, B, T).(0, A, S) = (X, BA, BS + T(A, A))``."""
    lin = frame.lin @ g.lin
    quad = np.einsum("ia,akl->ikl", frame.lin, g.quad) + np.einsum(
        "iab,ak,bl->ikl", frame.quad, g.lin, g.lin
    )
    return Jet2Frame(np.asarray(frame.base, dtype=float), lin, quad)


# ---------------------------------------------------------------------------
# the subgroup H
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HElement:
    """``[[A, 0], [alpha, 1]]`` on the slice ``a = 1``."""

    A: np.ndarray
    alpha: np.ndarray
    p: int
    q: int

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        n = self.p + self.q
        if A.shape != (n, n) or alpha.shape != (n,):
            raise ValueError("HElement shape mismatch")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "alpha", alpha)

    @property
    def n(self) -> int:
        return self.p + self.q

    @classmethod
    def identity(cls, p: int, q: int) -> "HElement":
        return cls(np.eye(p + q), np.zeros(p + q), p, q)

    @classmethod
    def from_coords(cls, coords, p: int, q: int) -> "HElement":
        n = p + q
        coords = np.asarray(coords, dtype=float)
        A = np.zeros((n, n))
        pat = gl_pattern(p, q)
        for val, (r, c) in zip(coords[: len(pat)], pat):
            A[r, c] = val
        alpha = np.concatenate([np.zeros(p), coords[len(pat):]])
        return cls(A, alpha, p, q)

    def coords(self) -> np.ndarray:
        pat = gl_pattern(self.p, self.q)
        return np.concatenate([[self.A[r, c] for r, c in pat], self.alpha[self.p:]])

    def matrix(self) -> np.ndarray:
        n = self.n
        out = np.zeros((n + 1, n + 1))
        out[:n, :n] = self.A
        out[n, :n] = self.alpha
        out[n, n] = 1.0
        return out

    def __matmul__(self, other: "HElement") -> "HElement":
        return HElement(self.A @ other.A, self.alpha @ other.A + other.alpha, self.p, self.q)

    def inverse(self) -> "HElement":
        Ainv = np.linalg.inv(self.A)
        return HElement(Ainv, -self.alpha @ Ainv, self.p, self.q)

    def is_adapted(self, tol: float = 0.0) -> bool:
        p = self.p
        return bool(np.all(np.abs(self.A[p:, :p]) <= tol) and np.all(np.abs(self.alpha[:p]) <= tol))


def include_H(h: HElement) -> G2Element:
    """2-jet of ``Z -> AZ / (alpha Z + 1)``: ``(A, -A_k alpha_l - A_l alpha_k)``."""
    quad = -np.einsum("ik,l->ikl", h.A, h.alpha) - np.einsum("il,k->ikl", h.A, h.alpha)
    return G2Element(h.A.copy(), quad)


def project_group(h: HElement) -> HElement:
    """Transverse block ``D`` and ``alpha''`` as an element of H(q+1)."""
    p = h.p
    return HElement(h.A[p:, p:], h.alpha[p:], 0, h.q)


def random_h(rng: np.random.Generator, p: int, q: int, scale: float = 0.3) -> HElement:
    """Random adapted H element near the identity."""
    n = p + q
    A = np.eye(n) + scale * rng.uniform(-1, 1, (n, n))
    A[p:, :p] = 0.0
    alpha = np.concatenate([np.zeros(p), scale * rng.uniform(-1, 1, q)])
    return HElement(A, alpha, p, q)


# ---------------------------------------------------------------------------
# graded Lie algebra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LieG:
    """``v`` (grade -1) + ``m0`` (grade 0) + ``xi`` (grade 1, transverse)."""

    v: np.ndarray
    m0: np.ndarray
    xi: np.ndarray
    p: int
    q: int

    def __post_init__(self):
        n = self.p + self.q
        for name, shape in (("v", (n,)), ("m0", (n, n)), ("xi", (n,))):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}")
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.p + self.q

    @classmethod
    def zero(cls, p: int, q: int) -> "LieG":
        n = p + q
        return cls(np.zeros(n), np.zeros((n, n)), np.zeros(n), p, q)

    @classmethod
    def from_coords(cls, coords, p: int, q: int) -> "LieG":
        n = p + q
        coords = np.asarray(coords, dtype=float)
        pat = gl_pattern(p, q)
        m0 = np.zeros((n, n))
        for val, (r, c) in zip(coords[n: n + len(pat)], pat):
            m0[r, c] = val
        xi = np.concatenate([np.zeros(p), coords[n + len(pat):]])
        return cls(coords[:n], m0, xi, p, q)

    def coords(self) -> np.ndarray:
        pat = gl_pattern(self.p, self.q)
        return np.concatenate([self.v, [self.m0[r, c] for r, c in pat], self.xi[self.p:]])

    def matrix(self) -> np.ndarray:
        n = self.n
        out = np.zeros((n + 1, n + 1))
        out[:n, :n] = self.m0
        out[:n, n] = self.v
        out[n, :n] = self.xi
        return out

    @classmethod
    def from_matrix(cls, mat: np.ndarray, p: int, q: int, tol: float = 1e-9) -> "LieG":
        """Read back a realization, absorbing the corner entry into the identity."""
        n = p + q
        mat = np.asarray(mat, dtype=float)
        m0 = mat[:n, :n] - mat[n, n] * np.eye(n)
        xi = mat[n, :n]
        scale = max(1.0, float(np.abs(mat).max()))
        if np.abs(m0[p:, :p]).max(initial=0.0) > tol * scale or np.abs(xi[:p]).max(initial=0.0) > tol * scale:
            raise SubalgebraError("element leaves the foliated subalgebra")
        m0 = m0.copy()
        m0[p:, :p] = 0.0
        xi = xi.copy()
        xi[:p] = 0.0
        return cls(mat[:n, n].copy(), m0, xi, p, q)

    def __add__(self, other: "LieG") -> "LieG":
        return LieG(self.v + other.v, self.m0 + other.m0, self.xi + other.xi, self.p, self.q)

    def __sub__(self, other: "LieG") -> "LieG":
        return LieG(self.v - other.v, self.m0 - other.m0, self.xi - other.xi, self.p, self.q)

    def __mul__(self, s: float) -> "LieG":
        return LieG(self.v * s, self.m0 * s, self.xi * s, self.p, self.q)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.abs(self.coords()).max(initial=0.0))


def bracket(a: LieG, b: LieG) -> LieG:
    """Matrix commutator of the realizations, read back modulo scalars."""
    ma, mb = a.matrix(), b.matrix()
    return LieG.from_matrix(ma @ mb - mb @ ma, a.p, a.q)


def adjoint(h: HElement, a: LieG) -> LieG:
    """``Ad(h) a = h a h^{-1}`` in the matrix realization."""
    hm = h.matrix()
    return LieG.from_matrix(hm @ a.matrix() @ np.linalg.inv(hm), a.p, a.q)


def exp_H(xi, t: float, p: int, q: int) -> HElement:
    """``exp(t [[0, 0], [xi, 0]]) = I + t [[0, 0], [xi, 0]]``."""
    xi = np.asarray(xi, dtype=float)
    n = p + q
    if xi.shape == (q,):
        xi = np.concatenate([np.zeros(p), xi])
    if np.any(xi[:p] != 0):
        raise ValueError("grade-1 generator must be transverse")
    return HElement(np.eye(n), t * xi, p, q)


def ad_inverse_parts(A, Ainv, alpha, v, m0, xi):
    """Grades of ``Ad(h^{-1}) (v, m0, xi)`` for ``h = [[A, 0], [alpha, 1]]``.

    Written with ring operations only so it runs over jets; leading axes
    broadcast.  ``v`` and ``xi`` are ``(..., n)``, matrices ``(..., n, n)``.
    """
    from . import taylor

    w = (Ainv @ v[..., None])[..., 0]
    aw = (alpha * w).sum(axis=-1)
    conj = Ainv @ m0 @ A
    n = A.shape[-1]
    ident = np.eye(n)
    m0_new = conj + taylor.einsum("...i,...j->...ij", w, alpha) + aw[..., None, None] * ident
    xi_new = (xi[..., None, :] @ A)[..., 0, :] - (alpha[..., None, :] @ conj)[..., 0, :] - aw[..., None] * alpha
    return w, m0_new, xi_new
