"""
Hermite polynomial chaos on independent standard-normal germs.

Basis functions are products of probabilists' Hermite polynomials
``He_m(xi_g)``, one factor per germ, truncated at total degree ``order``.
The number of terms is ``(n_germs + order)! / (n_germs! order!)``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import hermite_e

from .errors import DomainError

ORDERING_TAG = "graded-lex/single-germ-first"


@dataclass(frozen=True)
class MultiIndexBasis:
    n_germs: int
    order: int
    terms: tuple

    @property
    def size(self) -> int:
        return len(self.terms)

    @property
    def Q(self) -> int:
        return len(self.terms) - 1

    @cached_property
    def norm_sq(self) -> np.ndarray:
        """<phi_k^2> = prod over germs of m!."""
        return np.array([math.prod(math.factorial(m) for m in t) for t in self.terms], dtype=float)

    def index(self, multi_index) -> int:
        return self.terms.index(tuple(multi_index))

    def germ_term(self, germ: int) -> int:
        """Index of the linear basis function xi_germ."""
        e = [0] * self.n_germs
        e[germ] = 1
        return self.index(e)

    def evaluate(self, xi) -> np.ndarray:
        """Basis values at germ draws: shape (n_draws, size)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if xi.shape[1] != self.n_germs:
            raise DomainError(f"germ vectors must have length {self.n_germs}, got {xi.shape[1]}")
        he = [_he_table(xi[:, g], self.order) for g in range(self.n_germs)]
        out = np.ones((xi.shape[0], self.size))
        for k, t in enumerate(self.terms):
            for g, m in enumerate(t):
                if m:
                    out[:, k] *= he[g][m]
        return out


def _he_table(x, order):
    """He_0..He_order at x via the three-term recurrence."""
    table = [np.ones_like(x), x.copy()]
    for n in range(1, order):
        table.append(x * table[n] - n * table[n - 1])
    return table[: order + 1]


def n_terms(n_germs: int, order: int) -> int:
    return math.comb(n_germs + order, order)


def build_basis(n_germs: int, order: int, max_terms: int = 1_000_000) -> MultiIndexBasis:
    """Total-degree Hermite basis.

    Terms are graded by total degree; within a degree, single-germ terms come
    first (by germ index), followed by mixed terms in descending
    lexicographic order.  For two germs and order 2 this yields
    ``1, xi1, xi2, xi1^2-1, xi2^2-1, xi1*xi2``.
    """
    if n_germs < 1 or order < 1:
        raise DomainError(f"need n_germs >= 1 and order >= 1, got ({n_germs}, {order})")
    count = n_terms(n_germs, order)
    if count > max_terms:
        raise OverflowError(f"basis with {count} terms exceeds the limit of {max_terms}")
    terms = []
    for degree in range(order + 1):
        level = [t for t in itertools.product(range(degree + 1), repeat=n_germs) if sum(t) == degree]
        single = sorted((t for t in level if sum(1 for m in t if m) <= 1), key=lambda t: [-m for m in t])
        mixed = sorted((t for t in level if sum(1 for m in t if m) > 1), reverse=True)
        terms.extend(single + mixed)
    return MultiIndexBasis(n_germs, order, tuple(terms))


def eval_basis(basis: MultiIndexBasis, k: int, xi) -> float:
    if not 0 <= k <= basis.Q:
        raise DomainError(f"term index {k} outside 0..{basis.Q}")
    xi = np.asarray(xi, dtype=float)
    value = 1.0
    for g, m in enumerate(basis.terms[k]):
        if m:
            value *= float(hermite_e.hermeval(xi[g], [0] * m + [1]))
    return value


def _he_triple(a: int, b: int, c: int) -> float:
    """E[He_a He_b He_c] for a standard normal variable."""
    total = a + b + c
    if total % 2:
        return 0.0
    s = total // 2
    if s < a or s < b or s < c:
        return 0.0
    f = math.factorial
    return f(a) * f(b) * f(c) / (f(s - a) * f(s - b) * f(s - c))


@dataclass(frozen=True)
class GalerkinTensors:
    norm_sq: np.ndarray
    triple: np.ndarray  # triple[i, j, k] = <phi_i phi_j phi_k>


def norms_and_triples(basis: MultiIndexBasis) -> GalerkinTensors:
    n = basis.size
    triple = np.zeros((n, n, n))
    for i, j, k in itertools.combinations_with_replacement(range(n), 3):
        v = math.prod(
            _he_triple(a, b, c) for a, b, c in zip(basis.terms[i], basis.terms[j], basis.terms[k])
        )
        if v:
            for p in set(itertools.permutations((i, j, k))):
                triple[p] = v
    return GalerkinTensors(basis.norm_sq.copy(), triple)


def gauss_hermite(n_nodes: int, n_germs: int):
    """Tensorised probabilists' Gauss-Hermite rule; weights sum to one."""
    x, w = hermite_e.hermegauss(n_nodes)
    w = w / w.sum()
    nodes = np.array(list(itertools.product(x, repeat=n_germs)))
    weights = np.array([math.prod(c) for c in itertools.product(w, repeat=n_germs)])
    return nodes, weights


@dataclass(frozen=True)
class GpcSurrogate:
    basis: MultiIndexBasis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.basis.size,):
            raise DomainError(f"expected {self.basis.size} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, basis, value):
        c = np.zeros(basis.size)
        c[0] = value
        return cls(basis, c)

    @classmethod
    def gaussian(cls, basis, mean, std, germ):
        """mean + std * xi_germ."""
        c = np.zeros(basis.size)
        c[0] = mean
        c[basis.germ_term(germ)] = std
        return cls(basis, c)

    def mean(self) -> float:
        return float(self.coeffs[0])

    def variance(self, tensors: GalerkinTensors | None = None) -> float:
        norm = self.basis.norm_sq if tensors is None else tensors.norm_sq
        return float(np.sum(self.coeffs[1:] ** 2 * norm[1:]))

    def std(self) -> float:
        return math.sqrt(self.variance())

    def sample(self, xi) -> np.ndarray:
        return self.basis.evaluate(xi) @ self.coeffs

    def to_dict(self) -> dict:
        return {
            "n_germs": self.basis.n_germs,
            "order": self.basis.order,
            "ordering": ORDERING_TAG,
            "coeffs": [float(v) for v in self.coeffs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "GpcSurrogate":
        if d.get("ordering", ORDERING_TAG) != ORDERING_TAG:
            raise DomainError(f"unsupported basis ordering {d['ordering']!r}")
        return cls(build_basis(d["n_germs"], d["order"]), np.array(d["coeffs"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "GpcSurrogate":
        return cls.from_dict(json.loads(text))


# the two-uncertainty, second-order case used for the battery model
def default_basis() -> MultiIndexBasis:
    return build_basis(2, 2)


def sample(s: GpcSurrogate, xi) -> np.ndarray:
    return s.sample(xi)


def mean(s: GpcSurrogate) -> float:
    return s.mean()


def variance(s: GpcSurrogate, tensors: GalerkinTensors | None = None) -> float:
    return s.variance(tensors)


def expand_transform(f, s: GpcSurrogate, quad_order: int = 10) -> GpcSurrogate:
    """Project ``f(s(xi))`` onto the basis of ``s`` by tensorised quadrature."""
    basis = s.basis
    if quad_order < basis.order + 2:
        raise DomainError(f"quad_order must be >= {basis.order + 2}, got {quad_order}")
    nodes, weights = gauss_hermite(quad_order, basis.n_germs)
    phi = basis.evaluate(nodes)
    values = np.asarray(f(phi @ s.coeffs), dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise DomainError(f"transform is not finite at quadrature node {nodes[bad[0]].tolist()}")
    coeffs = (weights * values) @ phi / basis.norm_sq
    return GpcSurrogate(basis, coeffs)
