"""Multi-indices and symmetric tensors in the monomial basis.

A symmetric tensor of degree ``k`` on ``R^dim`` is stored through its
polynomial realization ``P_S(a) = S(a, ..., a) = sum_g S_g a**g``.  The
coefficient ``S_g`` of a multi-index ``g`` therefore carries no multinomial
factor, and the full symmetric array is ``S[i_1..i_k] = S_g * g! / k!``.

Besides the :class:`SymTensor` value type, the module exposes the linear
maps behind each operation as plain matrices so that they can be applied to
coefficient vectors whose entries are jets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from . import taylor

MultiIndex = tuple[int, ...]
Variance = Literal["contravariant", "covariant"]


@lru_cache(maxsize=None)
def multi_indices(dim: int, degree: int) -> tuple[MultiIndex, ...]:
    """All exponent tuples of length ``dim`` summing to ``degree``.

    Ordered graded-lexicographically, largest first exponent first.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if dim == 1:
        return ((degree,),)
    out = []
    for head in range(degree, -1, -1):
        for tail in multi_indices(dim - 1, degree - head):
            out.append((head,) + tail)
    return tuple(out)


@lru_cache(maxsize=None)
def index_of(dim: int, degree: int) -> dict[MultiIndex, int]:
    return {g: i for i, g in enumerate(multi_indices(dim, degree))}


def count(dim: int, degree: int) -> int:
    return math.comb(dim + degree - 1, degree)


def factorial(g: MultiIndex) -> int:
    return math.prod(math.factorial(e) for e in g)


def multi_index_of(indices: tuple[int, ...], dim: int) -> MultiIndex:
    """Exponent tuple counting how often each slot appears in ``indices``."""
    g = [0] * dim
    for i in indices:
        g[i] += 1
    return tuple(g)


@lru_cache(maxsize=None)
def expansion_matrix(dim: int, degree: int) -> np.ndarray:
    """Matrix mapping monomial coefficients to the flattened symmetric array."""
    idx = index_of(dim, degree)
    mat = np.zeros((dim**degree, count(dim, degree)))
    for flat, tup in enumerate(itertools.product(range(dim), repeat=degree)):
        g = multi_index_of(tup, dim)
        mat[flat, idx[g]] = factorial(g) / math.factorial(degree)
    return mat


@lru_cache(maxsize=None)
def compression_matrix(dim: int, degree: int) -> np.ndarray:
    """Matrix mapping a flattened symmetric array back to monomial coefficients."""
    idx = index_of(dim, degree)
    mat = np.zeros((count(dim, degree), dim**degree))
    for flat, tup in enumerate(itertools.product(range(dim), repeat=degree)):
        mat[idx[multi_index_of(tup, dim)], flat] = 1.0
    return mat


@lru_cache(maxsize=None)
def contraction_matrix(dim: int, degree: int, slot: int) -> np.ndarray:
    """Matrix of ``i(e^slot)``: degree ``k`` coefficients to degree ``k-1``."""
    src = multi_indices(dim, degree)
    dst = index_of(dim, degree - 1)
    mat = np.zeros((len(dst), len(src)))
    for col, g in enumerate(src):
        if g[slot]:
            h = list(g)
            h[slot] -= 1
            mat[dst[tuple(h)], col] = g[slot]
    return mat


@lru_cache(maxsize=None)
def product_tensor(dim: int, deg_a: int, deg_b: int) -> np.ndarray:
    """Bilinear map of polynomial multiplication on coefficient vectors."""
    ia = multi_indices(dim, deg_a)
    ib = multi_indices(dim, deg_b)
    out = index_of(dim, deg_a + deg_b)
    ten = np.zeros((len(out), len(ia), len(ib)))
    for a, ga in enumerate(ia):
        for b, gb in enumerate(ib):
            ten[out[tuple(x + y for x, y in zip(ga, gb))], a, b] = 1.0
    return ten


@lru_cache(maxsize=None)
def pairing_weights(dim: int, degree: int) -> np.ndarray:
    """Weights ``g!/k!`` so that ``pair(S, T) = sum_g w_g S_g T_g``."""
    k_fact = math.factorial(degree)
    return np.array([factorial(g) / k_fact for g in multi_indices(dim, degree)])


@lru_cache(maxsize=None)
def transverse_selection(dim: int, degree: int, p: int) -> np.ndarray:
    """Indices of coefficients supported on the last ``dim - p`` slots."""
    idx = index_of(dim, degree)
    return np.array([idx[(0,) * p + g] for g in multi_indices(dim - p, degree)], dtype=int)


# ---------------------------------------------------------------------------
# array-level operations (entries may be jets)
# ---------------------------------------------------------------------------


def _apply(mat: np.ndarray, coeffs):
    """Apply a constant matrix along the trailing axis of ``coeffs``."""
    if isinstance(coeffs, taylor.Jet):
        return taylor.einsum("...j,ij->...i", coeffs, mat)
    return np.asarray(coeffs) @ mat.T


def contract_coeffs(eta, coeffs, dim: int, degree: int):
    """``i(eta)`` on coefficient vectors; ``eta`` is a real covector."""
    mat = sum(eta[j] * contraction_matrix(dim, degree, j) for j in range(dim) if eta[j])
    if isinstance(mat, int):
        mat = np.zeros((count(dim, degree - 1), count(dim, degree)))
    return _apply(mat, coeffs)


def pair_coeffs(a, b, dim: int, degree: int):
    w = pairing_weights(dim, degree)
    return (a * b * w).sum(axis=-1)


def push_coeffs(mat, coeffs, dim: int, degree: int):
    """Action of a linear map on contravariant coefficients, ``v -> mat v`` per slot.

    ``mat`` has shape ``(..., dim, dim)`` and ``coeffs`` shape ``(..., M)``;
    either may be a jet.
    """
    if degree == 0:
        return coeffs
    full = _apply(expansion_matrix(dim, degree), coeffs)
    lead = full.shape[:-1]
    full = full.reshape(lead + (dim,) * degree)
    letters = "abcdefgh"[:degree]
    for slot in range(degree):
        src = letters
        dst = letters[:slot] + "z" + letters[slot + 1:]
        full = taylor.einsum(f"...z{letters[slot]},...{src}->...{dst}", mat, full)
    return _apply(compression_matrix(dim, degree), full.reshape(lead + (dim**degree,)))


# ---------------------------------------------------------------------------
# value type
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymTensor:
    """Dense symmetric tensor with monomial-basis components."""

    dim: int
    degree: int
    variance: Variance
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float).reshape(-1)
        if comps.size != count(self.dim, self.degree):
            raise ValueError(
                f"expected {count(self.dim, self.degree)} components, got {comps.size}"
            )
        if self.variance not in ("contravariant", "covariant"):
            raise ValueError(f"unknown variance {self.variance!r}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def zeros(cls, dim: int, degree: int, variance: Variance = "contravariant") -> "SymTensor":
        return cls(dim, degree, variance, np.zeros(count(dim, degree)))

    @classmethod
    def from_dict(cls, dim: int, degree: int, entries: dict, variance: Variance = "contravariant"):
        comps = np.zeros(count(dim, degree))
        idx = index_of(dim, degree)
        for g, val in entries.items():
            comps[idx[tuple(g)]] = val
        return cls(dim, degree, variance, comps)

    @classmethod
    def power(cls, vec, degree: int, variance: Variance = "contravariant") -> "SymTensor":
        """``vec ∨ ... ∨ vec`` with ``degree`` factors."""
        vec = np.asarray(vec, dtype=float)
        dim = vec.size
        comps = np.array(
            [math.factorial(degree) / factorial(g) * np.prod(vec ** np.array(g)) for g in multi_indices(dim, degree)]
        )
        return cls(dim, degree, variance, comps)

    def __getitem__(self, g: MultiIndex) -> float:
        return float(self.components[index_of(self.dim, self.degree)[tuple(g)]])

    def as_dict(self) -> dict[MultiIndex, float]:
        return dict(zip(multi_indices(self.dim, self.degree), self.components.tolist()))

    def polynomial(self, a) -> float:
        """Evaluate ``S(a, ..., a)``."""
        a = np.asarray(a, dtype=float)
        return float(sum(c * np.prod(a ** np.array(g)) for g, c in zip(multi_indices(self.dim, self.degree), self.components)))

    def full(self) -> np.ndarray:
        """The symmetric ``dim**degree`` array."""
        flat = expansion_matrix(self.dim, self.degree) @ self.components
        return flat.reshape((self.dim,) * self.degree)

    def __add__(self, other: "SymTensor") -> "SymTensor":
        _check_compatible(self, other)
        if self.degree != other.degree:
            raise ValueError("degree mismatch")
        return SymTensor(self.dim, self.degree, self.variance, self.components + other.components)

    def __mul__(self, scalar: float) -> "SymTensor":
        return SymTensor(self.dim, self.degree, self.variance, self.components * scalar)

    __rmul__ = __mul__


def _check_compatible(s: SymTensor, t: SymTensor) -> None:
    if s.dim != t.dim:
        raise ValueError(f"dimension mismatch: {s.dim} vs {t.dim}")
    if s.variance != t.variance:
        raise ValueError(f"variance mismatch: {s.variance} vs {t.variance}")


def sym_product(s: SymTensor, t: SymTensor) -> SymTensor:
    """Symmetric product, i.e. multiplication of polynomial realizations."""
    _check_compatible(s, t)
    ten = product_tensor(s.dim, s.degree, t.degree)
    comps = np.einsum("oab,a,b->o", ten, s.components, t.components)
    return SymTensor(s.dim, s.degree + t.degree, s.variance, comps)


def contract(eta, s: SymTensor) -> SymTensor:
    """Inner product ``i(eta) S``: derivative of ``P_S`` along ``eta``."""
    eta = np.asarray(eta, dtype=float)
    if s.variance != "contravariant":
        raise ValueError("contract expects a contravariant tensor")
    if s.degree == 0:
        raise ValueError("cannot contract a degree-0 tensor")
    if eta.shape != (s.dim,):
        raise ValueError("covector dimension mismatch")
    return SymTensor(s.dim, s.degree - 1, s.variance, contract_coeffs(eta, s.components, s.dim, s.degree))


def pair(s: SymTensor, t: SymTensor) -> float:
    """Full contraction with ``<v^k, eta^k> = <v, eta>^k``."""
    if s.dim != t.dim or s.degree != t.degree:
        raise ValueError("shape mismatch in pairing")
    if {s.variance, t.variance} != {"contravariant", "covariant"}:
        raise ValueError("pairing needs one contravariant and one covariant tensor")
    return float(pair_coeffs(s.components, t.components, s.dim, s.degree))


def project_transverse(s: SymTensor, p: int) -> SymTensor:
    """Keep the components supported on the last ``dim - p`` slots."""
    if not 0 <= p < s.dim:
        raise ValueError("need 0 <= p < dim")
    sel = transverse_selection(s.dim, s.degree, p)
    return SymTensor(s.dim - p, s.degree, s.variance, s.components[sel])
