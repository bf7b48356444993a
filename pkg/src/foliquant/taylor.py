"""Nested first-order jets for higher-order forward differentiation.

A :class:`Jet` of depth ``d`` is an element of ``R[e_0, ..., e_{d-1}]`` with
``e_i**2 == 0``.  Coefficients live in one ndarray of shape
``(2**d,) + value_shape``; the leading index is a bitmask naming the product
of generators the coefficient multiplies.  Value shapes are arbitrary, so one
jet can carry a whole batch of points, vectors or matrices at once.

Each call to :func:`lift` appends one generator.  Nesting ``k`` lifts with
the same direction gives ``k``-th derivatives, and nesting lifts along
point-dependent vector fields gives iterated Lie derivatives.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

MAX_DEPTH = 6

# Gathered pair products larger than this many floats are split per subset.
_GATHER_LIMIT = 4_000_000


class JetCapacityError(ValueError):
    """Raised when an operation would exceed :data:`MAX_DEPTH` generators."""


class SingularJetError(ArithmeticError):
    """Raised when a division or solve hits a singular standard part."""


@lru_cache(maxsize=None)
def _pair_table(depth: int):
    """Disjoint subset pairs (t, u) sorted by t | u, with reduceat offsets."""
    size = 1 << depth
    pairs = [(t | u, t, u) for t in range(size) for u in range(size) if not t & u]
    pairs.sort()
    s_idx = np.array([p[0] for p in pairs])
    t_idx = np.array([p[1] for p in pairs])
    u_idx = np.array([p[2] for p in pairs])
    starts = np.searchsorted(s_idx, np.arange(size))
    return t_idx, u_idx, starts


@lru_cache(maxsize=None)
def _complement_subsets(depth: int):
    """For each t, the array of subsets u of the complement of t."""
    size = 1 << depth
    return [np.array([u for u in range(size) if not t & u]) for t in range(size)]


def _convolve(a: np.ndarray, b: np.ndarray, depth: int, op) -> np.ndarray:
    """Truncated product ``c[s] = sum_{t|u = s, t&u = 0} op(a[t], b[u])``."""
    if depth == 0:
        return op(a, b)
    t_idx, u_idx, starts = _pair_table(depth)
    probe = op(a[:1], b[:1])
    if len(t_idx) * probe[0].size <= _GATHER_LIMIT:
        prod = op(a[t_idx], b[u_idx])
        return np.add.reduceat(prod, starts, axis=0)
    out = np.zeros((1 << depth,) + probe.shape[1:], dtype=probe.dtype)
    for t, us in enumerate(_complement_subsets(depth)):
        out[t | us] += op(a[t][None], b[us])
    return out


def _pad(c: np.ndarray, ndim: int) -> np.ndarray:
    """Left-pad the value axes of a coefficient array to ``ndim`` value axes."""
    extra = ndim - (c.ndim - 1)
    if extra > 0:
        c = c.reshape((c.shape[0],) + (1,) * extra + c.shape[1:])
    return c


def _mul(x, y):
    return x * y


def _matmul(x, y):
    return np.matmul(x, y)


class Jet:
    """Element of a truncated polynomial ring with square-zero generators."""

    __slots__ = ("c", "depth")
    __array_ufunc__ = None

    def __init__(self, coeffs, depth: int):
        coeffs = np.asarray(coeffs, dtype=float)
        if depth > MAX_DEPTH:
            raise JetCapacityError(f"jet depth {depth} exceeds capacity {MAX_DEPTH}")
        if coeffs.shape[:1] != (1 << depth,):
            raise ValueError("leading axis must have length 2**depth")
        self.c = coeffs
        self.depth = depth

    # construction -----------------------------------------------------

    @classmethod
    def constant(cls, value, depth: int = 0) -> "Jet":
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros((1 << depth,) + value.shape)
        coeffs[0] = value
        return cls(coeffs, depth)

    # basic properties ------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.c.shape[1:]

    @property
    def ndim(self) -> int:
        return self.c.ndim - 1

    @property
    def std(self) -> np.ndarray:
        """Standard (real) part."""
        return self.c[0]

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        return f"Jet(depth={self.depth}, shape={self.shape}, std={self.std!r})"

    def promote(self, depth: int) -> "Jet":
        if depth == self.depth:
            return self
        if depth < self.depth:
            raise ValueError("cannot promote to a smaller depth")
        if depth > MAX_DEPTH:
            raise JetCapacityError(f"jet depth {depth} exceeds capacity {MAX_DEPTH}")
        coeffs = np.zeros((1 << depth,) + self.shape)
        coeffs[: 1 << self.depth] = self.c
        return Jet(coeffs, depth)

    def coefficient(self, mask: int) -> np.ndarray:
        """Real coefficient of the generator product named by ``mask``."""
        return self.c[mask]

    # structural ops ----------------------------------------------------

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.c[(slice(None),) + idx], self.depth)

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.c.reshape((self.c.shape[0],) + tuple(shape)), self.depth)

    def transpose(self, *axes) -> "Jet":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], tuple):
            axes = axes[0]
        return Jet(self.c.transpose((0,) + tuple(a + 1 for a in axes)), self.depth)

    def swapaxes(self, a: int, b: int) -> "Jet":
        a = a % self.ndim
        b = b % self.ndim
        return Jet(np.swapaxes(self.c, a + 1, b + 1), self.depth)

    @property
    def T(self) -> "Jet":
        return self.transpose()

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis,)
        axis = tuple(a % self.ndim + 1 for a in axis)
        return Jet(self.c.sum(axis=axis), self.depth)

    def broadcast_to(self, shape) -> "Jet":
        shape = tuple(shape)
        c = _pad(self.c, len(shape))
        return Jet(np.broadcast_to(c, (c.shape[0],) + shape).copy(), self.depth)

    def __setitem__(self, idx, value) -> None:
        if not isinstance(idx, tuple):
            idx = (idx,)
        value = as_jet(value)
        if value.depth > self.depth:
            raise ValueError("cannot assign a deeper jet into a shallower one")
        value = value.promote(self.depth)
        target = self.c[(slice(None),) + idx]
        self.c[(slice(None),) + idx] = _pad(value.c, target.ndim - 1)

    # arithmetic ---------------------------------------------------------

    def __neg__(self) -> "Jet":
        return Jet(-self.c, self.depth)

    def __pos__(self) -> "Jet":
        return self

    def __add__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            shape = np.broadcast_shapes(self.shape, np.shape(other))
            coeffs = np.broadcast_to(_pad(self.c, len(shape)), (self.c.shape[0],) + shape).copy()
            coeffs[0] += other
            return Jet(coeffs, self.depth)
        a, b = _align(self, other)
        return Jet(a.c + b.c, a.depth)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __rsub__(self, other) -> "Jet":
        return (-self) + other

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(_pad(self.c, other.ndim) * other, self.depth)
        a, b = _align(self, other)
        return Jet(_convolve(a.c, b.c, a.depth, _mul), a.depth)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            if np.any(other == 0):
                raise SingularJetError("division by zero")
            return Jet(_pad(self.c, other.ndim) / other, self.depth)
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> "Jet":
        return self.reciprocal() * other

    def __pow__(self, power) -> "Jet":
        if isinstance(power, (int, np.integer)):
            if power < 0:
                return self.reciprocal() ** (-power)
            result = Jet.constant(np.ones(self.shape), self.depth)
            base = self
            while power:
                if power & 1:
                    result = result * base
                power >>= 1
                if power:
                    base = base * base
            return result
        raise TypeError("jets support integer powers only")

    def __matmul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(np.matmul(_pad(self.c, other.ndim), other), self.depth)
        a, b = _align(self, other)
        return Jet(_convolve(a.c, b.c, a.depth, _matmul), a.depth)

    def __rmatmul__(self, other) -> "Jet":
        other = np.asarray(other, dtype=float)
        return Jet(np.matmul(other, _pad(self.c, other.ndim)), self.depth)

    # analytic functions ---------------------------------------------------

    def _series(self, derivs: Sequence[np.ndarray]) -> "Jet":
        """Evaluate ``sum_j derivs[j] / j! * N**j`` with ``N`` the nilpotent part."""
        nil = Jet(self.c.copy(), self.depth)
        nil.c[0] = 0.0
        out = Jet.constant(derivs[0], self.depth)
        power = None
        for j in range(1, self.depth + 1):
            power = nil if power is None else power * nil
            out = out + power * (derivs[j] / math.factorial(j))
        return out

    def reciprocal(self) -> "Jet":
        x0 = self.std
        if np.any(x0 == 0):
            raise SingularJetError("division by a jet with zero standard part")
        derivs = [(-1.0) ** j * math.factorial(j) / x0 ** (j + 1) for j in range(self.depth + 1)]
        return self._series(derivs)

    def exp(self) -> "Jet":
        e = np.exp(self.std)
        return self._series([e] * (self.depth + 1))

    def sin(self) -> "Jet":
        s, c = np.sin(self.std), np.cos(self.std)
        cycle = [s, c, -s, -c]
        return self._series([cycle[j % 4] for j in range(self.depth + 1)])

    def cos(self) -> "Jet":
        s, c = np.sin(self.std), np.cos(self.std)
        cycle = [c, -s, -c, s]
        return self._series([cycle[j % 4] for j in range(self.depth + 1)])


JetScalar = Jet


def _align(a: Jet, b: Jet) -> tuple[Jet, Jet]:
    depth = max(a.depth, b.depth)
    a, b = a.promote(depth), b.promote(depth)
    nd = max(a.ndim, b.ndim)
    return Jet(_pad(a.c, nd), depth), Jet(_pad(b.c, nd), depth)


def as_jet(x, depth: int = 0) -> Jet:
    """Wrap reals or arrays as jets; promote existing jets to ``depth``."""
    if isinstance(x, Jet):
        return x.promote(max(depth, x.depth))
    return Jet.constant(x, depth)


def depth_of(*xs) -> int:
    return max((x.depth for x in xs if isinstance(x, Jet)), default=0)


def standard_part(x):
    return x.std if isinstance(x, Jet) else np.asarray(x, dtype=float)


def stack(items: Sequence, axis: int = 0) -> Jet:
    depth = depth_of(*items)
    jets = [as_jet(x, depth) for x in items]
    if axis < 0:
        axis += jets[0].ndim + 1
    return Jet(np.stack([j.c for j in jets], axis=axis + 1), depth)


def concatenate(items: Sequence, axis: int = 0) -> Jet:
    depth = depth_of(*items)
    jets = [as_jet(x, depth) for x in items]
    if axis < 0:
        axis += jets[0].ndim
    return Jet(np.concatenate([j.c for j in jets], axis=axis + 1), depth)


def einsum(subscripts: str, a, b) -> Jet:
    """Two-operand einsum over jets; two plain arrays give a plain array."""
    inputs, out = subscripts.replace(" ", "").split("->")
    sa, sb = inputs.split(",")
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.einsum(subscripts, a, b)
    if not isinstance(a, Jet):
        return Jet(np.einsum(f"{sa},Z{sb}->Z{out}", np.asarray(a, float), b.c), b.depth)
    if not isinstance(b, Jet):
        return Jet(np.einsum(f"Z{sa},{sb}->Z{out}", a.c, np.asarray(b, float)), a.depth)
    depth = max(a.depth, b.depth)
    a, b = a.promote(depth), b.promote(depth)
    spec = f"Z{sa},Z{sb}->Z{out}"
    return Jet(_convolve(a.c, b.c, a.depth, lambda x, y: np.einsum(spec, x, y)), a.depth)


def eye(n: int, depth: int = 0) -> Jet:
    return Jet.constant(np.eye(n), depth)


def zeros(shape, depth: int = 0) -> Jet:
    return Jet(np.zeros((1 << depth,) + tuple(np.atleast_1d(shape))), depth)


def sin(x):
    return x.sin() if isinstance(x, Jet) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Jet) else np.cos(x)


def exp(x):
    return x.exp() if isinstance(x, Jet) else np.exp(x)


# ---------------------------------------------------------------------------
# lifting and derivatives
# ---------------------------------------------------------------------------


def lift(x, direction) -> Jet:
    """Return ``x + e * direction`` with ``e`` a fresh generator."""
    depth = max(depth_of(x, direction), 0)
    x = as_jet(x, depth)
    direction = as_jet(direction, depth)
    if depth + 1 > MAX_DEPTH:
        raise JetCapacityError(f"jet depth {depth + 1} exceeds capacity {MAX_DEPTH}")
    shape = np.broadcast_shapes(x.shape, direction.shape)
    half = 1 << depth
    coeffs = np.zeros((2 * half,) + shape)
    coeffs[:half] = _pad(x.c, len(shape))
    coeffs[half:] = _pad(direction.c, len(shape))
    return Jet(coeffs, depth + 1)


def tangent(y: Jet, depth: int):
    """Coefficient of generator ``depth`` in ``y`` as a jet of that depth.

    ``y`` may be a plain value (no dependence on the generator), in which case
    the tangent is zero.
    """
    if not isinstance(y, Jet) or y.depth <= depth:
        shape = np.shape(standard_part(y))
        return Jet(np.zeros((1 << depth,) + shape), depth)
    if y.depth != depth + 1:
        raise ValueError("inner computation leaked extra generators")
    half = 1 << depth
    return Jet(y.c[half:], depth)


def truncate(y, depth: int):
    """Drop every generator at index ``>= depth``."""
    if not isinstance(y, Jet) or y.depth <= depth:
        return as_jet(y, depth)
    return Jet(y.c[: 1 << depth], depth)


def seed(point: Sequence[float], directions: Sequence[Sequence[float]], order: int = 1) -> list[Jet]:
    """Coordinate jets at ``point`` with ``order`` generators per direction.

    Generator ``d * order + r`` carries direction ``d`` for ``r < order``, so
    the coefficient of the product of all ``order`` generators of direction
    ``d`` is the ``order``-th derivative along that direction.
    """
    if order < 1:
        raise ValueError("order must be positive")
    point = np.asarray(point, dtype=float)
    dirs = np.asarray(directions, dtype=float).reshape(len(directions), -1) if len(directions) else np.zeros((0, point.size))
    if dirs.shape[1:] != point.shape and len(directions):
        raise ValueError("each direction must have the point's dimension")
    depth = len(dirs) * order
    if depth > MAX_DEPTH:
        raise JetCapacityError(f"seeding needs depth {depth}, capacity is {MAX_DEPTH}")
    u: Jet = Jet.constant(point)
    for d in range(len(dirs)):
        for _ in range(order):
            u = lift(u, dirs[d])
    return [u[i] for i in range(point.size)]


def lie_derivative(f: Callable, field: Callable) -> Callable:
    """``L_V f`` as a closure: ``u -> Df(u)[V(u)]`` one generator deeper."""

    def derived(u):
        depth = depth_of(u)
        return tangent(f(lift(u, field(u))), depth)

    return derived


def nested_derivative(f: Callable, point, fields: Sequence[Callable]):
    """``L_{V_1} ... L_{V_k} f`` at ``point``.

    ``f`` and every field act on (possibly batched) points over the jet ring;
    fields return vectors of the point's shape.  A plain-array ``point`` gives
    a plain-array result.
    """
    depth0 = depth_of(point)
    if depth0 + len(fields) > MAX_DEPTH:
        raise JetCapacityError(
            f"{len(fields)} nested derivatives at depth {depth0} exceed capacity {MAX_DEPTH}"
        )
    g = f
    for field in reversed(fields):
        g = lie_derivative(g, field)
    out = g(point)
    if not isinstance(point, Jet):
        return standard_part(out)
    return as_jet(out, depth0)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def _check_invertible(a0: np.ndarray) -> None:
    cond = np.linalg.cond(a0)
    if not np.all(np.isfinite(cond)) or np.any(cond > 1e13):
        raise SingularJetError("standard part of the matrix is singular")


def linear_solve(a, b):
    """Solve ``a @ x = b`` over jets by Neumann iteration on the standard part.

    ``a`` has shape ``(..., n, n)`` and ``b`` shape ``(..., n)``; both may be
    jets or plain arrays.
    """
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        a0 = np.asarray(a, dtype=float)
        _check_invertible(a0)
        return np.linalg.solve(a0, np.asarray(b, dtype=float)[..., None])[..., 0]
    depth = depth_of(a, b)
    a = as_jet(a, depth)
    b = as_jet(b, depth)
    a0 = a.std
    _check_invertible(a0)
    nil = Jet(a.c.copy(), depth)
    nil.c[0] = 0.0

    def apply_inverse(rhs: Jet) -> Jet:
        coeffs = np.moveaxis(rhs.c, 0, -1)
        return Jet(np.moveaxis(np.linalg.solve(a0, coeffs), -1, 0), depth)

    x = apply_inverse(b)
    for _ in range(depth):
        r = b - (nil @ x[..., None])[..., 0]
        x = apply_inverse(r)
    return x


def inverse(a):
    """Matrix inverse over jets."""
    if not isinstance(a, Jet):
        a0 = np.asarray(a, dtype=float)
        _check_invertible(a0)
        return np.linalg.inv(a0)
    depth = a.depth
    a0 = a.std
    _check_invertible(a0)
    nil = Jet(a.c.copy(), depth)
    nil.c[0] = 0.0
    inv0 = np.linalg.inv(a0)
    x = Jet.constant(inv0, depth)
    for _ in range(depth):
        x = Jet.constant(inv0, depth) - (Jet.constant(inv0, depth) @ nil) @ x
    return x
