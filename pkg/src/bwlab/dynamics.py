"""Circle and SU(2) extensions of a hyperbolic toral automorphism.

The skew product is Phi(x, theta) = (A x, theta + a(x)) for a U(1) cocycle
and Phi(x, q) = (A x, g(x) q) for an SU(2) cocycle. Base orbits are run on
the lattice (Z / 2^s)^2 in exact integer arithmetic, so the automorphism is
applied without rounding drift.
"""

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import config
from . import quaternion as quat
from ._validation import ValidationError, check_positive_int
from .harmonic import su2_rep_matrix

CAT_MAP = ((2, 1), (1, 1))


@dataclass(frozen=True)
class U1Cocycle:
    """a(x) = c + sum_m [A_m cos 2 pi m.x + B_m sin 2 pi m.x] on T^2."""

    constant: float = 0.0
    terms: tuple = ()  # ((m1, m2), A, B)

    @classmethod
    def cos_x1(cls, amplitude=1.0):
        return cls(0.0, (((1, 0), float(amplitude), 0.0),))

    def is_constant(self):
        return all(A == 0 and B == 0 for _, A, B in self.terms)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], float(self.constant))
        for m, A, B in self.terms:
            ph = 2 * np.pi * (m[0] * x[..., 0] + m[1] * x[..., 1])
            out = out + A * np.cos(ph) + B * np.sin(ph)
        return out

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for m, A, B in self.terms:
            ph = 2 * np.pi * (m[0] * x[..., 0] + m[1] * x[..., 1])
            s = 2 * np.pi * (-A * np.sin(ph) + B * np.cos(ph))
            out[..., 0] += s * m[0]
            out[..., 1] += s * m[1]
        return out

    def grad_sup_bound(self):
        """Upper bound for sup_x |da_x| in the Euclidean operator norm."""
        return sum(2 * np.pi * math.hypot(*m) * math.hypot(A, B) for m, A, B in self.terms)


def _periodic_bump(x, centre, width):
    d = np.cos(2 * np.pi * (x[..., 0] - centre[0])) + np.cos(2 * np.pi * (x[..., 1] - centre[1])) - 2
    return np.exp(d / width)


@dataclass(frozen=True)
class SU2Cocycle:
    """g(x) = exp(v(x)) with v a sum of smooth periodic bumps times imaginary quaternions.

    With no bumps g is the constant ``base``; otherwise g(x) = base * exp(v(x)).
    """

    base: tuple = (1.0, 0.0, 0.0, 0.0)
    bumps: tuple = ()  # ((c1, c2), width, (vx, vy, vz))

    @classmethod
    def constant(cls, q):
        return cls(tuple(float(c) for c in quat.normalize(np.asarray(q, dtype=float))))

    @classmethod
    def two_bump(cls, strength=1.5):
        return cls(bumps=(((0.25, 0.3), 0.5, (strength, 0.0, 0.0)), ((0.7, 0.6), 0.5, (0.0, strength, 0.0))))

    def is_constant(self):
        return len(self.bumps) == 0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        v = np.zeros(x.shape[:-1] + (3,))
        for c, w, vec in self.bumps:
            v = v + _periodic_bump(x, c, w)[..., None] * np.asarray(vec, dtype=float)
        b = np.broadcast_to(np.asarray(self.base, dtype=float), v.shape[:-1] + (4,))
        return quat.multiply(b, quat.exp_imaginary(v))


class SkewSystem:
    """Hyperbolic automorphism A of T^2 extended by a U(1) or SU(2) cocycle."""

    def __init__(self, cocycle, base_matrix=CAT_MAP):
        A = np.array(base_matrix, dtype=np.int64)
        if A.shape != (2, 2) or not np.array_equal(A, np.array(base_matrix)):
            raise ValidationError("base_matrix must be a 2x2 integer matrix")
        det = int(round(np.linalg.det(A)))
        if abs(det) != 1:
            raise ValidationError("base_matrix must have determinant +-1")
        ev = np.linalg.eigvals(A.astype(float))
        if np.any(np.abs(ev.imag) > 0) or np.any(np.isclose(np.abs(ev), 1.0)):
            raise ValidationError("base_matrix is not hyperbolic")
        if not isinstance(cocycle, (U1Cocycle, SU2Cocycle)):
            raise ValidationError("cocycle must be a U1Cocycle or SU2Cocycle")
        self.base_matrix = A
        self.cocycle = cocycle
        self.group = "u1" if isinstance(cocycle, U1Cocycle) else "su2"
        self.det = det
        self.inverse_matrix = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]], dtype=np.int64) * det
        rowsum = int(np.max(np.abs(A).sum(axis=1)))
        self.lattice_bits = 62 - max(1, math.ceil(math.log2(rowsum)))
        w, v = np.linalg.eig(A.astype(float))
        order = np.argsort(np.abs(w))
        self.expansion = float(np.abs(w[order[1]]))
        self.stable_eig = float(w[order[0]].real)
        self.unstable_eig = float(w[order[1]].real)
        self.stable_dir = v[:, order[0]] / np.linalg.norm(v[:, order[0]])
        self.unstable_dir = v[:, order[1]] / np.linalg.norm(v[:, order[1]])

    def step_lattice(self, X):
        """One application of A on integer lattice coordinates mod 2^bits."""
        N = np.int64(1) << np.int64(self.lattice_bits)
        A = self.base_matrix
        return np.mod(X @ A.T, N)


# --------------------------------------------------------------------------
# Observables and correlations


@dataclass(frozen=True)
class Observable:
    """e^{2 pi i m.x} times a fibre factor.

    U(1): e^{i q theta} with ``fiber`` = q. SU(2): the matrix coefficient
    rho_k(q)_{ij} with ``fiber`` = (k, i, j).
    """

    mode: tuple = (0, 0)
    fiber: object = 0

    def label(self):
        return f"m={self.mode[0]},{self.mode[1]};f={self.fiber}"

    def evaluate(self, x, fib, group):
        base = np.exp(2j * np.pi * (self.mode[0] * x[:, 0] + self.mode[1] * x[:, 1]))
        if group == "u1":
            return base * np.exp(1j * int(self.fiber) * fib)
        k, i, j = self.fiber
        return base * su2_rep_matrix(int(k), fib)[:, i, j]

    def mean(self, group):
        if tuple(self.mode) != (0, 0):
            return 0.0
        if group == "u1":
            return 1.0 if int(self.fiber) == 0 else 0.0
        return 1.0 if int(self.fiber[0]) == 0 else 0.0


@dataclass
class CorrelationSeries:
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    observables: tuple = ("", "")
    sample_count: int = 0
    seed: int = 0

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "re", "im", "stderr"])
        for t, v, s in zip(self.times, self.values, self.stderr):
            w.writerow([int(t), repr(float(v.real)), repr(float(v.imag)), repr(float(s))])
        return buf.getvalue()


def skew_step(system, X, fib):
    """One step of the skew product on lattice points X (int64) and fibre values."""
    x = X * 2.0 ** -system.lattice_bits
    if system.group == "u1":
        fib = np.mod(fib + system.cocycle(x), 2 * np.pi)
    else:
        fib = quat.normalize(quat.multiply(system.cocycle(x), fib))
    return system.step_lattice(X), fib


def _correlation_chunk(args):
    system, f1, f2, t_max, n, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    bits = system.lattice_bits
    X = rng.integers(0, np.int64(1) << np.int64(bits), size=(n, 2), dtype=np.int64)
    scale = 2.0 ** -bits
    x = X * scale
    if system.group == "u1":
        fib = rng.uniform(0, 2 * np.pi, n)
    else:
        fib = quat.random_unit(rng, n)
    conj2 = np.conj(f2.evaluate(x, fib, system.group))
    sums = np.zeros(t_max + 1, dtype=complex)
    sq = np.zeros(t_max + 1)
    for t in range(t_max + 1):
        v = f1.evaluate(x, fib, system.group) * conj2
        sums[t] = v.sum()
        sq[t] = np.sum(v.real**2 + v.imag**2)
        if t == t_max:
            break
        X, fib = skew_step(system, X, fib)
        x = X * scale
    return sums, sq


def default_workers():
    env = os.environ.get("BWLAB_WORKERS")
    if env:
        return check_positive_int(int(env), "BWLAB_WORKERS")
    return os.cpu_count() or 1


def correlation(system, f1, f2, t_max, samples, seed=0, workers=1):
    """Monte-Carlo C_t = E[f1 o Phi_t . conj(f2)] - E f1 . conj(E f2), t = 0..t_max.

    Samples are split into fixed-size chunks seeded by SeedSequence(seed).spawn,
    so the result does not depend on the worker count.
    """
    samples = check_positive_int(samples, "samples")
    if samples < config.MIN_CORRELATION_SAMPLES:
        raise ValidationError(f"samples must be >= {config.MIN_CORRELATION_SAMPLES}")
    t_max = check_positive_int(t_max, "t_max", minimum=0)
    chunk = config.CORRELATION_CHUNK
    sizes = [chunk] * (samples // chunk) + ([samples % chunk] if samples % chunk else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(system, f1, f2, t_max, n, s) for n, s in zip(sizes, seeds)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_correlation_chunk, jobs))
    else:
        parts = [_correlation_chunk(j) for j in jobs]
    sums = np.sum(np.array([p[0] for p in parts]), axis=0)
    sq = np.sum(np.array([p[1] for p in parts]), axis=0)
    mean = sums / samples
    var = np.maximum(sq / samples - np.abs(mean) ** 2, 0.0)
    values = mean - f1.mean(system.group) * np.conj(f2.mean(system.group))
    return CorrelationSeries(
        np.arange(t_max + 1), values, np.sqrt(var / samples), (f1.label(), f2.label()), samples, seed
    )


def closed_form_correlation(system, f1, f2, t_max):
    """Exact C_t for a constant U(1) cocycle a = c.

    E[e^{2 pi i (m1 A^t x - m2 x)} e^{i (q1 - q2) theta}] e^{i q1 t c} is
    nonzero only when q1 = q2 and (A^T)^t m1 = m2.
    """
    if system.group != "u1" or not system.cocycle.is_constant():
        raise ValidationError("closed form needs a constant U(1) cocycle")
    c = system.cocycle.constant
    q1, q2 = int(f1.fiber), int(f2.fiber)
    m = np.array(f1.mode, dtype=object)
    AT = system.base_matrix.T.astype(object)
    out = np.zeros(t_max + 1, dtype=complex)
    for t in range(t_max + 1):
        if q1 == q2 and tuple(m) == tuple(f2.mode):
            out[t] = np.exp(1j * q1 * t * c)
        m = AT.dot(m)
    out = out - f1.mean("u1") * np.conj(f2.mean("u1"))
    return out


# --------------------------------------------------------------------------
# Dynamical connection form


class BetaValue(NamedTuple):
    value: float
    tail_bound: float


def _orbit_exact(A, x, n):
    """A^n x mod 1 with Fraction coordinates."""
    x = [Fraction(c) % 1 for c in x]
    a, b, c, d = (int(v) for v in A.ravel())
    for _ in range(n):
        x = [(a * x[0] + b * x[1]) % 1, (c * x[0] + d * x[1]) % 1]
    return x


def dynamical_beta(system, x, direction, truncation, scale=1.0):
    """Discrete dynamical connection 1-form of a U(1) extension.

    stable:   sum_{n=0}^{N} da(A^n x)(A^n xi_s)
    unstable: -sum_{n=1}^{N} da(A^-n x)(A^-n xi_u)
    flow:     -a(x)
    xi is ``scale`` times the unit eigendirection. Base points are iterated
    exactly in rational arithmetic. The tail bound is
    ||da||_inf |xi| lambda^-N / (1 - lambda^-1).
    """
    if system.group != "u1":
        raise ValidationError("dynamical_beta needs a U(1) cocycle")
    N = check_positive_int(truncation, "truncation")
    if direction == "flow":
        return BetaValue(-float(system.cocycle(np.array([float(Fraction(c)) for c in x]))), 0.0)
    if direction not in ("stable", "unstable"):
        raise ValidationError("direction must be 'stable', 'unstable' or 'flow'")
    lam = system.expansion
    if direction == "stable":
        M, xi, ns, sign = system.base_matrix, system.stable_dir, range(0, N + 1), 1.0
        factor = system.stable_eig
    else:
        M, xi, ns, sign = system.inverse_matrix, system.unstable_dir, range(1, N + 1), -1.0
        factor = 1.0 / system.unstable_eig
    xi = scale * xi
    pt = [Fraction(c) % 1 for c in x]
    total = 0.0
    cur = 0
    for n in ns:
        pt = _orbit_exact(M, pt, n - cur)
        cur = n
        g = system.cocycle.grad(np.array([float(pt[0]), float(pt[1])]))
        # A^n xi_s = mu_s^n xi_s, A^-n xi_u = mu_u^-n xi_u
        total += float(g @ xi) * factor**n
    tail = system.cocycle.grad_sup_bound() * abs(scale) * lam ** (-N) / (1 - 1 / lam)
    return BetaValue(sign * total, tail)


# --------------------------------------------------------------------------
# Holonomy sampler


def _cocycle_product(cocycle, points):
    """g(p_{-1}) ... g(p_0) for a sequence of base points (later points on the left)."""
    gs = cocycle(np.asarray(points))
    out = np.array(quat.IDENTITY, dtype=float)
    for g in gs:
        out = quat.multiply(g, out)
    return out


def holonomy_transitivity_sample(system, path_budget, seed=0, max_mode=3, depth=None):
    """Holonomies of homoclinic loops at the fixed point 0.

    A homoclinic point y = t xi_u = s xi_s + m (m in Z^2) joins 0 to itself
    along an unstable then a stable leaf. Its loop holonomy is H^s H^u with
      H^s = g(0)^-n g(A^{n-1} y) ... g(y)
      H^u = g(A^-1 y) ... g(A^-n y) g(0)^-n,
    truncated at depth n where lambda^-n is below 1e-15. The time loop
    g(0) is always the first element.
    """
    if system.group != "su2":
        raise ValidationError("holonomy sampler needs an SU(2) cocycle")
    budget = check_positive_int(path_budget, "path_budget")
    if budget > 10_000:
        raise ValidationError("path_budget must be <= 1e4")
    lam = system.expansion
    n = depth or int(np.ceil(15 * np.log(10) / np.log(lam)))
    eu, es = system.unstable_dir, system.stable_dir
    mu_s, mu_u = system.stable_eig, system.unstable_eig
    g0 = system.cocycle(np.zeros(2))
    g0_inv_n = np.array(quat.IDENTITY, dtype=float)
    for _ in range(n):
        g0_inv_n = quat.multiply(quat.conjugate(g0), g0_inv_n)
    rng = np.random.default_rng(seed)
    out = [g0]
    M = np.column_stack([eu, -es])
    while len(out) < budget:
        m = rng.integers(-max_mode, max_mode + 1, size=2)
        if not m.any():
            continue
        t, s = np.linalg.solve(M, m.astype(float))
        fwd = np.array([(mu_s**k) * s * es for k in range(n)])  # A^k y, k = 0..n-1
        bwd = np.array([(mu_u ** (-k)) * t * eu for k in range(n, 0, -1)])  # A^-k y, k = n..1
        Hs = quat.multiply(g0_inv_n, _cocycle_product(system.cocycle, np.mod(fwd, 1.0)))
        Hu = quat.multiply(_cocycle_product(system.cocycle, np.mod(bwd, 1.0)), g0_inv_n)
        out.append(quat.normalize(quat.multiply(Hs, Hu)))
    return [np.asarray(q) for q in out]
