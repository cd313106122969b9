"""Word balls, covering radii and density exponents.

W_n is the set of products of 1..n letters from the generators and their
inverses. Its covering radius eps(n) on SU(2), on the flag sphere
SU(2)/T or on a torus measures how fast the orbit of a point fills the
space; a power law eps(n) ~ C n^-alpha is the Diophantine property.

Metrics: on SU(2) the great-circle angle of unit quaternions (diameter pi);
on SU(2)/T = S^2 the quotient metric, i.e. half the great-circle angle, so
that the projection is 1-Lipschitz; on T^d the sup norm of R^d/Z^d.
"""

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator

from . import config
from . import quaternion as quat
from ._validation import GuardError, ValidationError, check_positive_int

SPACES = ("su2", "s2", "torus")


def _dedupe(cand, existing_tree, tol, boxsize=None):
    """Indices of rows of ``cand`` that are new (first occurrence, not in the tree)."""
    if len(cand) == 0:
        return np.zeros(0, dtype=int)
    keep = np.ones(len(cand), dtype=bool)
    if existing_tree is not None:
        d, _ = existing_tree.query(cand, k=1, distance_upper_bound=tol)
        keep &= ~np.isfinite(d)
    tree = cKDTree(cand, boxsize=boxsize)
    for i, j in sorted(tree.query_pairs(tol)):
        if keep[i] and keep[j]:
            keep[j] = False
    return np.flatnonzero(keep)


@dataclass
class WordBall:
    generators: list
    n: int
    space: str
    elements: object  # array (N, 4) for su2, (N, d) floats or list of Fraction tuples for torus
    lengths: np.ndarray  # shortest word length of each element
    sizes: list = field(default_factory=list)  # |W_k| for k = 1..n

    def upto(self, k):
        """Elements of W_k (prefix of the BFS order)."""
        count = self.sizes[k - 1]
        return self.elements[:count]


def _torus_exact(generators):
    return all(isinstance(c, (Fraction, int)) for g in generators for c in np.atleast_1d(g))


def word_ball(generators, n, space="su2", max_elements=5_000_000):
    """Breadth-first closure of words of length 1..n with deduplication.

    SU(2) generators are unit quaternions, merged at quaternion-angle
    tolerance 1e-9. Torus generators are rotation vectors; with Fraction
    entries the arithmetic is exact, otherwise floats mod 1 merged at the
    same tolerance.
    """
    n = check_positive_int(n, "n")
    if space not in ("su2", "torus"):
        raise ValidationError("word balls live on 'su2' or 'torus'")
    if len(generators) == 0:
        raise ValidationError("need at least one generator")
    if space == "su2":
        if len(generators) >= 2 and n > config.SU2_MAX_LENGTH:
            raise GuardError(f"n = {n} exceeds the size guard {config.SU2_MAX_LENGTH} for two generators")
        gens = quat.normalize(np.atleast_2d(np.asarray(generators, dtype=float)))
        letters = np.concatenate([gens, quat.conjugate(gens)])
        return _bfs_float(generators, letters, n, "su2", quat.multiply, None, max_elements)
    if _torus_exact(generators):
        return _bfs_exact_torus(generators, n, max_elements)
    gens = np.mod(np.atleast_2d(np.asarray(generators, dtype=float).reshape(len(generators), -1)), 1.0)
    letters = np.mod(np.concatenate([gens, -gens]), 1.0)

    def add(x, y):
        s = np.mod(x + y, 1.0)
        return np.where(s >= 1.0, s - 1.0, s)

    return _bfs_float(generators, letters, n, "torus", add, 1.0, max_elements)


def _bfs_float(generators, letters, n, space, op, boxsize, max_elements):
    tol = config.DEDUP_TOL
    first = _dedupe(letters, None, tol, boxsize)
    elements = letters[first]
    lengths = [np.ones(len(first), dtype=int)]
    frontier = elements
    sizes = [len(elements)]
    tree = cKDTree(elements, boxsize=boxsize)
    for k in range(2, n + 1):
        cand = op(np.repeat(frontier, len(letters), axis=0), np.tile(letters, (len(frontier), 1)))
        if space == "su2":
            cand = quat.normalize(cand)
        new = cand[_dedupe(cand, tree, tol, boxsize)]
        if len(elements) + len(new) > max_elements:
            raise GuardError(f"word ball exceeds {max_elements} elements at length {k}")
        elements = np.concatenate([elements, new])
        lengths.append(np.full(len(new), k, dtype=int))
        sizes.append(len(elements))
        frontier = new
        tree = cKDTree(elements, boxsize=boxsize)
    return WordBall(list(generators), n, space, elements, np.concatenate(lengths), sizes)


def _bfs_exact_torus(generators, n, max_elements):
    gens = [tuple(Fraction(c) % 1 for c in np.atleast_1d(g)) for g in generators]
    letters = gens + [tuple((-c) % 1 for c in g) for g in gens]
    seen, order, lengths, sizes = set(), [], [], []
    frontier = []
    for g in letters:
        if g not in seen:
            seen.add(g)
            order.append(g)
            lengths.append(1)
            frontier.append(g)
    sizes.append(len(order))
    for k in range(2, n + 1):
        nxt = []
        for w in frontier:
            for s in letters:
                e = tuple((a + b) % 1 for a, b in zip(w, s))
                if e not in seen:
                    seen.add(e)
                    order.append(e)
                    lengths.append(k)
                    nxt.append(e)
        if len(order) > max_elements:
            raise GuardError(f"word ball exceeds {max_elements} elements at length {k}")
        sizes.append(len(order))
        frontier = nxt
    return WordBall(list(generators), n, "torus", order, np.array(lengths), sizes)


# --------------------------------------------------------------------------
# Nets and covering radii


def su2_net(resolution):
    """Cell-centre grid in Hopf coordinates (Euler angles) on S^3 and its spacing bound.

    q = (cos e cos x1, cos e sin x1, -sin e cos x2, sin e sin x2) with
    e in [0, pi/2] split into ``resolution`` cells and x1, x2 into
    4 * resolution cells. Every point of S^3 lies within
    pi / (2 sqrt(2) resolution) of a node.
    """
    r = check_positive_int(resolution, "net_resolution")
    de = (np.pi / 2) / r
    dx = 2 * np.pi / (4 * r)
    e = (np.arange(r) + 0.5) * de
    x = (np.arange(4 * r) + 0.5) * dx
    E, X1, X2 = np.meshgrid(e, x, x, indexing="ij")
    c, s = np.cos(E), np.sin(E)
    q = np.stack([c * np.cos(X1), c * np.sin(X1), -s * np.cos(X2), s * np.sin(X2)], axis=-1).reshape(-1, 4)
    return q, 0.5 * np.hypot(de, dx)


def s2_net(resolution):
    """Latitude-longitude cell-centre grid on S^2; spacing in the quotient metric."""
    r = check_positive_int(resolution, "net_resolution")
    dt = np.pi / r
    dp = 2 * np.pi / (2 * r)
    t = (np.arange(r) + 0.5) * dt
    p = (np.arange(2 * r) + 0.5) * dp
    T, P = np.meshgrid(t, p, indexing="ij")
    v = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
    return v, 0.5 * 0.5 * np.hypot(dt, dp)


def torus_net(resolution, d):
    r = check_positive_int(resolution, "net_resolution")
    axes = [(np.arange(r) + 0.5) / r] * d
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    return pts, 0.5 / r


@dataclass(frozen=True)
class CoveringRadius:
    low: float  # measured sup over the net
    high: float  # low + net spacing
    spacing: float


def _nearest_chord(tree, net, chunk=200_000):
    out = np.empty(len(net))
    for i in range(0, len(net), chunk):
        out[i : i + chunk] = tree.query(net[i : i + chunk], k=1)[0]
    return out


def covering_radius(points, space, net_resolution=None):
    """sup over the space of the distance to ``points``, bracketed by net error.

    Returns [measured, measured + spacing]. For the circle (torus of
    dimension 1) the value is exact (sort-and-scan, spacing 0). Raises
    GuardError if the net spacing is not below a quarter of the measured
    radius.
    """
    if space not in SPACES:
        raise ValidationError(f"space must be one of {SPACES}")
    if space == "torus":
        pts = _torus_points(points)
        if pts.shape[1] == 1:
            r = circle_covering_radius(pts[:, 0])
            return CoveringRadius(r, r, 0.0)
        if net_resolution is None:
            raise ValidationError("net_resolution is required for tori of dimension >= 2")
        net, spacing = torus_net(net_resolution, pts.shape[1])
        tree = cKDTree(np.mod(pts, 1.0), boxsize=1.0)
        low = float(np.max(tree.query(net, k=1, p=np.inf)[0]))
    elif space == "su2":
        pts = quat.normalize(np.atleast_2d(np.asarray(points, dtype=float)))
        net, spacing = su2_net(net_resolution)
        chord = _nearest_chord(cKDTree(pts), net)
        low = float(np.max(2 * np.arcsin(np.clip(chord / 2, 0, 1))))
    else:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] == 4:
            pts = quat.hopf(quat.normalize(pts))
        net, spacing = s2_net(net_resolution)
        chord = _nearest_chord(cKDTree(pts), net)
        low = float(np.max(np.arcsin(np.clip(chord / 2, 0, 1))))
    if spacing >= low / config.NET_GUARD_FACTOR:
        raise GuardError(f"net spacing {spacing:.3g} not below radius/4 = {low / 4:.3g}; refine the net")
    return CoveringRadius(low, low + spacing, float(spacing))


def _torus_points(points):
    if isinstance(points, list) and points and isinstance(points[0], tuple):
        return np.array([[float(c) for c in p] for p in points])
    pts = np.asarray(points, dtype=float)
    return pts.reshape(len(pts), -1)


def circle_covering_radius(x):
    """Half the largest gap of the points on R/Z."""
    x = np.sort(np.mod(np.asarray(x, dtype=float), 1.0))
    gaps = np.diff(np.concatenate([x, [x[0] + 1.0]]))
    return float(np.max(gaps) / 2)


def auto_covering_radius(points, space, start=8, growth=1.5, max_resolution=256):
    """covering_radius with the net refined until the spacing guard passes."""
    res = start
    while True:
        try:
            return covering_radius(points, space, res), res
        except GuardError:
            if res >= max_resolution:
                raise
            res = min(max_resolution, int(np.ceil(res * growth)))


# --------------------------------------------------------------------------
# Density exponents


@dataclass
class DensityRecord:
    ns: np.ndarray
    radii: np.ndarray
    fitted_alpha: float
    residual: float
    fit_window: tuple
    radii_high: np.ndarray = None

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "radius_low", "radius_high"])
        high = self.radii if self.radii_high is None else self.radii_high
        for n, lo, hi in zip(self.ns, self.radii, high):
            w.writerow([int(n), repr(float(lo)), repr(float(hi))])
        return buf.getvalue()


def density_exponent_fit(ns, radii, fit_window=None, radii_high=None):
    """Least-squares slope of log eps against log n; alpha_hat is minus the slope."""
    ns = np.asarray(ns, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if len(ns) < 5 or len(ns) != len(radii):
        raise ValidationError("need >= 5 (n, eps) pairs")
    if np.any(np.diff(ns) <= 0):
        raise ValidationError("word lengths must increase")
    if np.any(np.diff(radii) > 1e-12 * radii[:-1]):
        raise ValidationError("covering radii increase with n: data fault")
    if fit_window is None:
        fit_window = (ns[0], ns[-1])
    sel = (ns >= fit_window[0]) & (ns <= fit_window[1])
    if sel.sum() < 2:
        raise ValidationError("fit window holds fewer than two points")
    x, y = np.log(ns[sel]), np.log(radii[sel])
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((y - A @ np.array([slope, icpt])) ** 2)))
    return DensityRecord(
        ns.astype(int), radii, -float(slope), resid,
        (int(fit_window[0]), int(fit_window[1])), None if radii_high is None else np.asarray(radii_high),
    )


def measure_density(generators, ns, space="su2", measure_space=None, start_resolution=8):
    """Build W_max(ns) once and record covering radii at every n in ``ns``."""
    ns = sorted(int(n) for n in ns)
    ball = word_ball(generators, ns[-1], space)
    target = measure_space or space
    lows, highs = [], []
    res = start_resolution
    for n in ns:
        pts = ball.upto(n)
        cr, res = auto_covering_radius(pts, target, start=res)
        lows.append(cr.low)
        highs.append(cr.high)
    return ns, np.array(lows), np.array(highs)


def stall_windows(ns, radii, rel=0.01, min_len=3):
    """Maximal runs of consecutive entries where each step shrinks eps by < ``rel``."""
    out, start = [], 0
    ns = list(ns)
    for i in range(1, len(ns) + 1):
        stalled = i < len(ns) and (radii[i - 1] - radii[i]) < rel * radii[i - 1]
        if not stalled:
            if i - start >= min_len:
                out.append((ns[start], ns[i - 1]))
            start = i
    return out


def random_su2_generators(seed, count=2):
    return quat.random_unit(np.random.default_rng(seed), count)


class DensityExponentEstimator(BaseEstimator):
    """scikit-learn style wrapper: ``fit(ns, radii)`` stores the fitted DensityRecord."""

    def __init__(self, fit_window=None):
        self.fit_window = fit_window

    def fit(self, X, y):
        self.record_ = density_exponent_fit(np.asarray(X).reshape(-1), np.asarray(y).reshape(-1), self.fit_window)
        self.alpha_ = self.record_.fitted_alpha
        return self

    def predict(self, X):
        """Power-law radius C n^-alpha through the fitted line."""
        r = self.record_
        x = np.log(r.ns.astype(float))
        c = np.exp(np.mean(np.log(r.radii) + r.fitted_alpha * x))
        return c * np.asarray(X, dtype=float) ** (-r.fitted_alpha)
