"""Highest-weight data for compact groups G = U(1)^a x SU(2)^b.

A weight is a pair (circle_part, su2_part) in Z^a x Z_{>=0}^b. Each SU(2)
entry k labels the irreducible representation on binary forms of degree k
(spin k/2).

Metric conventions
------------------
The bi-invariant metric is a product. On the i-th circle factor the
generator ``i`` of u(1) has squared length ``center_scale[i]``. On the j-th
SU(2) factor the inner product is ``killing_scale[j] * (-B / 2)`` with B the
Killing form; with ``killing_scale = 1`` the quotient SU(2)/T is the round
unit sphere (Gauss curvature 1) and the spin-l Casimir is l(l+1), i.e. the
weight 2l has eigenvalue l(l+1).
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from ._validation import ValidationError, check_real


@dataclass(frozen=True)
class GroupSpec:
    a: int
    b: int
    center_scale: tuple = None
    killing_scale: tuple = None

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or self.a + self.b < 1:
            raise ValidationError(f"need a, b >= 0 and a + b >= 1, got a={self.a}, b={self.b}")
        cs = (1.0,) * self.a if self.center_scale is None else tuple(float(s) for s in self.center_scale)
        ks = (1.0,) * self.b if self.killing_scale is None else tuple(float(s) for s in self.killing_scale)
        if len(cs) != self.a or len(ks) != self.b:
            raise ValidationError("one scale per factor is required")
        for s in cs + ks:
            check_real(s, "metric scale", low=0.0, strict_low=True)
        object.__setattr__(self, "center_scale", cs)
        object.__setattr__(self, "killing_scale", ks)

    @classmethod
    def u1(cls, a=1, scale=1.0):
        return cls(a, 0, center_scale=(scale,) * a)

    @classmethod
    def su2(cls, b=1, scale=1.0):
        return cls(0, b, killing_scale=(scale,) * b)

    @property
    def rank(self):
        return self.a + self.b

    @property
    def dim(self):
        return self.a + 3 * self.b

    @property
    def flag_dim(self):
        """Real dimension of G/T."""
        return 2 * self.b

    def fundamental_norm_sq(self):
        """Squared dual norms of the lattice generators, one per factor."""
        return np.array(
            [1.0 / s for s in self.center_scale] + [1.0 / (4.0 * s) for s in self.killing_scale]
        )

    @property
    def delta(self):
        """Half-sum of positive roots in lattice coordinates."""
        return (0,) * self.a + (1,) * self.b


@dataclass(frozen=True, order=True)
class Weight:
    circle_part: tuple = ()
    su2_part: tuple = ()

    def __post_init__(self):
        cp = tuple(int(c) for c in self.circle_part)
        sp = tuple(int(s) for s in self.su2_part)
        if any(s < 0 for s in sp):
            raise ValidationError(f"SU(2) weights must be >= 0, got {sp}")
        object.__setattr__(self, "circle_part", cp)
        object.__setattr__(self, "su2_part", sp)

    @property
    def components(self):
        return self.circle_part + self.su2_part

    @property
    def norm(self):
        return sum(abs(c) for c in self.components)

    def is_zero(self):
        return all(c == 0 for c in self.components)

    def check(self, g):
        if len(self.circle_part) != g.a or len(self.su2_part) != g.b:
            raise ValidationError(
                f"weight {self.components} does not match group with a={g.a}, b={g.b}"
            )
        return self

    @classmethod
    def zero(cls, g):
        return cls((0,) * g.a, (0,) * g.b)

    def to_list(self):
        return list(self.components)

    @classmethod
    def from_components(cls, g, comps):
        comps = list(comps)
        return cls(tuple(comps[: g.a]), tuple(comps[g.a :])).check(g)


def casimir_eigenvalue(g, k):
    """c(k) = |phi(k) + delta|^2 - |delta|^2 for the product metric on G."""
    k.check(g)
    lam = np.asarray(k.components, dtype=float)
    delta = np.asarray(g.delta, dtype=float)
    norms = g.fundamental_norm_sq()
    # the lattice generators are orthogonal (one per factor)
    return float(np.sum(norms * ((lam + delta) ** 2 - delta**2)))


def weyl_dim(g, k):
    k.check(g)
    d = 1
    for s in k.su2_part:
        d *= s + 1
    return d


def is_fibrewise_trivial(g, k):
    """True iff the line bundle over G/T attached to k is topologically trivial."""
    k.check(g)
    return all(s == 0 for s in k.su2_part)


def enumerate_weights(g, radius):
    """All weights with |k| <= radius, ordered by (|k|, components)."""
    check_real(radius, "radius", low=0.0)
    r = int(np.floor(radius + 1e-12))
    ranges = [range(-r, r + 1)] * g.a + [range(0, r + 1)] * g.b
    out = []
    for comps in product(*ranges):
        if sum(abs(c) for c in comps) <= r:
            out.append(Weight(comps[: g.a], comps[g.a :]))
    out.sort(key=lambda w: (w.norm, w.components))
    return out


@dataclass
class CasimirBound:
    """Tightest constant C with C^-1 (1+|k|^2) <= c(k) <= C (1+|k|^2) on a range."""

    C: float
    radius: float
    worst_weight: Weight = field(default=None)


def casimir_constant(g, radius):
    best, worst = 1.0, None
    for k in enumerate_weights(g, radius):
        if k.is_zero():
            continue
        c = casimir_eigenvalue(g, k)
        q = 1.0 + k.norm**2
        ratio = max(c / q, q / c)
        if ratio > best:
            best, worst = ratio, k
    return CasimirBound(best, radius, worst)
