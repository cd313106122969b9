"""Peter-Weyl Fourier analysis on trivialized bundles M x G.

Group elements of G = U(1)^a x SU(2)^b are flat arrays of length a + 4b: the
circle angles first, then one unit quaternion per SU(2) factor. Functions on
M x G are sampled as arrays of shape (n_base, n_nodes), one row per base
sample point and one column per group node.

Conventions. The transform of f at weight k is the d_k x d_k matrix

    F f(k, x) = int_G f(x, g) rho_k(g)^{-1} dg,

and the inverse is f(x, g) = sum_k d_k Tr(rho_k(g) F f(k, x)). With this
choice the transform of the matrix coefficient rho_k(g)[i, j] is supported
at k with a single entry 1/d_k at position (j, i), and the round trip is the
identity on band-limited functions.
"""

import json
from dataclasses import dataclass
from math import comb, factorial

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import quaternion as quat
from ._validation import GuardError, ValidationError, check_positive_int
from .lie_core import GroupSpec, Weight, casimir_eigenvalue, enumerate_weights, weyl_dim


def element_size(g):
    return g.a + 4 * g.b


def identity_element(g):
    e = np.zeros(element_size(g))
    for j in range(g.b):
        e[g.a + 4 * j] = 1.0
    return e


def split_element(g, elem):
    elem = np.asarray(elem, dtype=float)
    angles = elem[..., : g.a]
    quats = [elem[..., g.a + 4 * j : g.a + 4 * j + 4] for j in range(g.b)]
    return angles, quats


def multiply_elements(g, x, y):
    xa, xq = split_element(g, x)
    ya, yq = split_element(g, y)
    parts = [np.mod(xa + ya, 2 * np.pi)] + [quat.multiply(p, q) for p, q in zip(xq, yq)]
    return np.concatenate(parts, axis=-1)


def su2_rep_matrix(k, q):
    """Matrix of the degree-k binary-form representation at quaternion(s) q.

    Basis e_j = z1^(k-j) z2^j / sqrt(j! (k-j)!), action (rho(g)P)(z) = P(z g)
    with z a row vector; for k = 1 this returns the SU(2) matrix of q.
    """
    q = np.asarray(q, dtype=float)
    m = quat.to_matrix(q)
    g11, g12 = m[..., 0, 0], m[..., 0, 1]
    g21, g22 = m[..., 1, 0], m[..., 1, 1]
    d = k + 1
    out = np.zeros(q.shape[:-1] + (d, d), dtype=complex)
    norm = np.array([np.sqrt(float(factorial(j) * factorial(k - j))) for j in range(d)])
    for j in range(d):
        # (z1 g11 + z2 g21)^(k-j) (z1 g12 + z2 g22)^j, collect z1^(k-i) z2^i
        for s in range(k - j + 1):
            c1 = comb(k - j, s) * g11 ** (k - j - s) * g21**s
            for t in range(j + 1):
                i = s + t
                c2 = comb(j, t) * g12 ** (j - t) * g22**t
                out[..., i, j] += c1 * c2 * (norm[i] / norm[j])
    return out


def rep_matrix(g, k, elem):
    """rho_k(elem) for G = U(1)^a x SU(2)^b (Kronecker product over factors)."""
    k.check(g)
    elem = np.asarray(elem, dtype=float)
    if elem.shape[-1] != element_size(g):
        raise ValidationError(f"group elements need {element_size(g)} coordinates")
    angles, quats = split_element(g, elem)
    phase = np.exp(1j * np.tensordot(angles, np.asarray(k.circle_part, dtype=float), axes=([-1], [0])))
    out = phase[..., None, None] * np.ones(elem.shape[:-1] + (1, 1))
    for kj, qj in zip(k.su2_part, quats):
        block = su2_rep_matrix(kj, qj)
        out = np.einsum("...ab,...cd->...acbd", out, block).reshape(
            elem.shape[:-1] + (out.shape[-2] * block.shape[-2], out.shape[-1] * block.shape[-1])
        )
    return out


def matrix_coefficient(g, k, i, j, elem):
    d = weyl_dim(g, k)
    if not (0 <= i < d and 0 <= j < d):
        raise ValidationError(f"indices ({i}, {j}) out of range for dimension {d}")
    return rep_matrix(g, k, elem)[..., i, j]


@dataclass
class HaarQuadrature:
    """Product quadrature for the normalized Haar measure on U(1)^a x SU(2)^b.

    Circle factors use 2L+2 equispaced angles. Each SU(2) factor uses an
    Euler-angle grid: Gauss-Legendre in cos(beta) (this carries the sin(beta)
    Haar weight) times 2L+2 equispaced values of each of the two phase angles.
    Integrals of products of two matrix coefficients with |k| <= L are exact.
    """

    group: GroupSpec
    band: int
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, g, band):
        band = check_positive_int(band, "band", minimum=0)
        n = 2 * band + 2
        factors = []
        for _ in range(g.a):
            theta = 2 * np.pi * np.arange(n) / n
            factors.append((theta[:, None], np.full(n, 1.0 / n)))
        for _ in range(g.b):
            u, wu = np.polynomial.legendre.leggauss(n)
            xi = 2 * np.pi * np.arange(n) / n
            U, X1, X2 = np.meshgrid(u, xi, xi, indexing="ij")
            W = np.broadcast_to((wu / 2.0)[:, None, None] / n**2, U.shape)
            c = np.sqrt((1 + U) / 2)
            s = np.sqrt((1 - U) / 2)
            q = np.stack([c * np.cos(X1), c * np.sin(X1), -s * np.cos(X2), s * np.sin(X2)], axis=-1)
            factors.append((q.reshape(-1, 4), W.reshape(-1).copy()))
        nodes, weights = factors[0]
        for fn, fw in factors[1:]:
            nodes = np.concatenate(
                [np.repeat(nodes, len(fw), axis=0), np.tile(fn, (len(weights), 1))], axis=1
            )
            weights = np.outer(weights, fw).reshape(-1)
        return cls(g, band, nodes, weights)

    def __len__(self):
        return len(self.weights)

    def integrate(self, values):
        return np.tensordot(values, self.weights, axes=([-1], [0]))


@dataclass
class FourierBlock:
    weight: Weight
    coefficients: np.ndarray  # shape (n_base, d, d)

    @property
    def dim(self):
        return self.coefficients.shape[-1]

    def to_json(self):
        flat = self.coefficients.reshape(-1)
        return json.dumps(
            {
                "weight": self.weight.to_list(),
                "dim": int(self.dim),
                "base_samples": int(self.coefficients.shape[0]),
                "entries": [[float(z.real), float(z.imag)] for z in flat],
            }
        )

    @classmethod
    def from_json(cls, g, text):
        obj = json.loads(text)
        d = obj["dim"]
        entries = np.array([complex(re, im) for re, im in obj["entries"]])
        return cls(Weight.from_components(g, obj["weight"]), entries.reshape(-1, d, d))


def fourier_transform(samples, quad, k):
    """F f(k, x) at every base sample, by quadrature over the group nodes."""
    g = quad.group
    k.check(g)
    if k.norm > quad.band:
        raise GuardError(f"|k| = {k.norm} exceeds the quadrature band limit {quad.band}")
    samples = np.atleast_2d(np.asarray(samples))
    if samples.shape[-1] != len(quad):
        raise ValidationError("samples must have one column per quadrature node")
    rho_inv = np.conj(np.swapaxes(rep_matrix(g, k, quad.nodes), -1, -2))
    coeffs = np.einsum("xn,n,nab->xab", samples, quad.weights, rho_inv)
    return FourierBlock(k, coeffs)


def inverse_fourier(blocks, g, elements, n_base=1):
    """f(x, g) = sum_k d_k Tr(rho_k(g) F f(k, x)) at the given group elements."""
    elements = np.atleast_2d(np.asarray(elements, dtype=float))
    if not blocks:
        return np.zeros((n_base, len(elements)), dtype=complex)
    out = np.zeros((blocks[0].coefficients.shape[0], len(elements)), dtype=complex)
    for blk in blocks:
        rho = rep_matrix(g, blk.weight, elements)
        out += blk.dim * np.einsum("nab,xba->xn", rho, blk.coefficients)
    return out


def plancherel_sides(samples, quad, blocks, base_weights=None):
    """(||f||^2, sum_k d_k sum_i ||f_{k,i}||^2) with the base measure ``base_weights``."""
    samples = np.atleast_2d(samples)
    nb = samples.shape[0]
    bw = np.full(nb, 1.0 / nb) if base_weights is None else np.asarray(base_weights)
    lhs = float(bw @ quad.integrate(np.abs(samples) ** 2))
    rhs = 0.0
    for blk in blocks:
        per_point = np.sum(np.abs(blk.coefficients) ** 2, axis=(1, 2))
        rhs += blk.dim * float(bw @ per_point)
    return lhs, rhs


def random_band_limited(g, band, quad, n_base, rng):
    """Samples of a random f with Fourier support in |k| <= band, plus its blocks."""
    blocks = []
    for k in enumerate_weights(g, band):
        d = weyl_dim(g, k)
        c = (rng.standard_normal((n_base, d, d)) + 1j * rng.standard_normal((n_base, d, d))) / d
        blocks.append(FourierBlock(k, c))
    return inverse_fourier(blocks, g, quad.nodes), blocks


def _frame_steps(g, step):
    """Group elements exp(+-step X) for an orthonormal frame X of the Lie algebra."""
    out = []
    for i in range(g.a):
        for sign in (1.0, -1.0):
            e = identity_element(g)
            e[i] = sign * step / np.sqrt(g.center_scale[i])
            out.append((i, sign, e))
    for j in range(g.b):
        kappa = g.killing_scale[j]
        for m in range(3):
            for sign in (1.0, -1.0):
                e = identity_element(g)
                v = np.zeros(3)
                v[m] = sign * step / (2.0 * np.sqrt(kappa))
                e[g.a + 4 * j : g.a + 4 * j + 4] = quat.exp_imaginary(v)
                out.append((g.a + 3 * j + m, sign, e))
    return out


def vertical_laplacian_check(g, k, quad, step=None, max_nodes=64):
    """Relative error between a finite-difference group Laplacian and c(k).

    Applies geodesic second differences along an orthonormal frame to the
    matrix rho_k(h) at (up to ``max_nodes``) quadrature nodes h and returns
    || Delta_num rho - c(k) rho || / (c(k) || rho ||).
    """
    k.check(g)
    if k.is_zero():
        raise ValidationError("vertical_laplacian_check needs a nonzero weight")
    if step is None:
        step = 2 * np.pi / 4096 if g.b == 0 else 1e-3
    c = casimir_eigenvalue(g, k)
    idx = np.linspace(0, len(quad) - 1, min(max_nodes, len(quad))).astype(int)
    h = quad.nodes[idx]
    rho = rep_matrix(g, k, h)
    lap = np.zeros_like(rho)
    for _, _, e in _frame_steps(g, step):
        lap -= rep_matrix(g, k, multiply_elements(g, h, e))
    lap += 2 * (g.a + 3 * g.b) * rho
    lap /= step**2
    err = float(np.linalg.norm(lap - c * rho) / (c * np.linalg.norm(rho)))
    if err > 0.05:
        raise GuardError(f"finite-difference Laplacian off by {err:.3g}; step {step} too coarse")
    return err


class PeterWeylTransform(TransformerMixin, BaseEstimator):
    """Fibrewise Fourier transform as a scikit-learn style transformer.

    ``fit`` builds the Haar quadrature for ``band`` and records the weight
    set; ``transform`` maps samples of shape (n_base, n_nodes) to a list of
    FourierBlock; ``inverse_transform`` maps blocks back to node samples.
    """

    def __init__(self, a=0, b=1, band=4):
        self.a = a
        self.b = b
        self.band = band

    def fit(self, X=None, y=None):
        self.group_ = GroupSpec(self.a, self.b)
        self.quadrature_ = HaarQuadrature.build(self.group_, self.band)
        self.weights_ = enumerate_weights(self.group_, self.band)
        if X is not None:
            X = np.atleast_2d(np.asarray(X))
            if X.shape[-1] != len(self.quadrature_):
                raise ValidationError(
                    f"expected {len(self.quadrature_)} group nodes per row, got {X.shape[-1]}"
                )
        return self

    @property
    def nodes_(self):
        check_is_fitted(self, "quadrature_")
        return self.quadrature_.nodes

    def transform(self, X):
        check_is_fitted(self, "quadrature_")
        return [fourier_transform(X, self.quadrature_, k) for k in self.weights_]

    def inverse_transform(self, blocks):
        check_is_fitted(self, "quadrature_")
        return inverse_fourier(list(blocks), self.group_, self.quadrature_.nodes)
