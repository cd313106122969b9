"""Curvature non-degeneracy: F_min(l), F_min and the pointwise span test.

A CurvatureField stores, at each base sample x and for each pair of frame
vectors (i, j), the Lie-algebra value F[x, i, j] with a + 3b components:
one real per circle factor (the curvature is i times it), then the
imaginary-quaternion coordinates (x, y, z) of each su(2) factor. The maximal
torus of SU(2) is exp(t i), so a flag-fibre point is a unit vector n in S^2
and the weight pairing of an su(2) value v there is n . v.

For l in the chamber and fibre point n, the scalar 2-form

    Omega = sum_i l_i F_i + sum_j l_{a+j} (n_j . v_j)

is maximized over unit X, Y by its largest singular value. For a base of
dimension > 2 this operator-norm reading is the one implemented.
"""

import csv
import io
import re
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import config
from ._validation import ValidationError, check_positive_int
from .lie_core import GroupSpec


@dataclass
class CurvatureField:
    group: GroupSpec
    points: np.ndarray  # (N, n)
    values: np.ndarray  # (N, n, n, dim g)
    frames: np.ndarray = None  # (N, n, n), orthonormal frame per point

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.values = np.asarray(self.values, dtype=float)
        N, n = self.points.shape
        if self.values.shape != (N, n, n, self.group.dim):
            raise ValidationError(
                f"values must have shape {(N, n, n, self.group.dim)}, got {self.values.shape}"
            )
        if not np.array_equal(self.values, -np.swapaxes(self.values, 1, 2)):
            raise ValidationError("curvature values must be antisymmetric in the frame indices")
        if self.frames is None:
            self.frames = np.broadcast_to(np.eye(n), (N, n, n)).copy()

    @property
    def base_dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    @property
    def scale(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    @classmethod
    def from_pairs(cls, group, points, pair_values, frames=None):
        """Build from upper-triangle values: pair_values[x][(i, j)] for i < j."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        N, n = points.shape
        vals = np.zeros((N, n, n, group.dim))
        for x, entry in enumerate(pair_values):
            for (i, j), v in entry.items():
                vals[x, i, j] = v
                vals[x, j, i] = -np.asarray(v, dtype=float)
        return cls(group, points, vals, frames)

    def scaled(self, factor):
        return CurvatureField(self.group, self.points, self.values * factor, self.frames)

    def to_csv(self):
        N, n = self.points.shape
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        buf.write(f"# a={self.group.a} b={self.group.b} n={n}\n")
        header = [f"x{i}" for i in range(n)]
        header += [f"e{r}{c}" for r in range(n) for c in range(n)]
        header += [f"F{i}_{j}_{c}" for i in range(n) for j in range(i + 1, n) for c in range(self.group.dim)]
        w.writerow(header)
        for x in range(N):
            row = list(self.points[x]) + list(self.frames[x].reshape(-1))
            row += [self.values[x, i, j, c] for i in range(n) for j in range(i + 1, n) for c in range(self.group.dim)]
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        """Load the CSV layout written by :meth:`to_csv`.

        First line ``# a=<int> b=<int> n=<int>``; header columns ``x<i>``
        (coordinates), ``e<r><c>`` (frame, optional) and ``F<i>_<j>_<c>`` for
        i < j and Lie-algebra component c.
        """
        lines = text.splitlines()
        m = re.match(r"#\s*a=(\d+)\s+b=(\d+)\s+n=(\d+)", lines[0]) if lines else None
        if m is None:
            raise ValidationError("curvature CSV must start with '# a=<a> b=<b> n=<n>'")
        a, b, n = (int(v) for v in m.groups())
        group = GroupSpec(a, b)
        rows = list(csv.reader(lines[1:]))
        header, data = rows[0], np.array([[float(v) for v in r] for r in rows[1:] if r])
        col = {name: i for i, name in enumerate(header)}
        N = len(data)
        points = data[:, [col[f"x{i}"] for i in range(n)]]
        frames = None
        if "e00" in col:
            frames = data[:, [col[f"e{r}{c}"] for r in range(n) for c in range(n)]].reshape(N, n, n)
        vals = np.zeros((N, n, n, group.dim))
        for i in range(n):
            for j in range(i + 1, n):
                for c in range(group.dim):
                    vals[:, i, j, c] = data[:, col[f"F{i}_{j}_{c}"]]
                    vals[:, j, i, c] = -vals[:, i, j, c]
        return cls(group, points, vals, frames)


def constant_u1_field(B, grid=8, n=2):
    """Constant U(1) curvature F_12 = B on a grid of the unit n-torus."""
    axes = [np.arange(grid) / grid] * n
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    vals = np.zeros((len(pts), n, n, 1))
    vals[:, 0, 1, 0] = B
    vals[:, 1, 0, 0] = -B
    return CurvatureField(GroupSpec(1, 0), pts, vals)


def magnetic_torus_field(m, grid=8):
    """Curvature of the magnetic torus model: constant 2 pi m on the unit torus."""
    return constant_u1_field(2 * np.pi * m, grid)


def fibonacci_sphere(count):
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    r = np.sqrt(1 - z * z)
    t = np.pi * (1 + 5**0.5) * i
    return np.stack([r * np.cos(t), r * np.sin(t), z], axis=-1)


def _sphere_from_angles(t):
    th, ph = t
    return np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])


def _angles_from_sphere(v):
    return np.array([np.arccos(np.clip(v[2], -1, 1)), np.arctan2(v[1], v[0])])


def _two_form(field, l, fibre):
    """Omega[x] for all x given l and one unit vector per SU(2) factor."""
    g = field.group
    V = field.values
    om = np.tensordot(V[..., : g.a], np.asarray(l[: g.a], dtype=float), axes=([-1], [0]))
    for j in range(g.b):
        lj = l[g.a + j]
        if lj != 0:
            om = om + lj * np.tensordot(V[..., g.a + 3 * j : g.a + 3 * j + 3], fibre[j], axes=([-1], [0]))
    return om


def _opnorm(om):
    if om.shape[-1] == 2:
        return np.abs(om[..., 0, 1])
    return np.linalg.svd(om, compute_uv=False)[..., 0]


def _check_direction(g, l):
    l = np.asarray(l, dtype=float).reshape(-1)
    if l.shape != (g.rank,):
        raise ValidationError(f"chamber direction needs {g.rank} components")
    if abs(np.linalg.norm(l) - 1) > 1e-12:
        raise ValidationError("chamber direction must have unit norm")
    if np.any(l[g.a :] < 0):
        raise ValidationError("SU(2) components of the chamber direction must be >= 0")
    return l


def _fibre_scan(field, l, fiber_samples):
    """Per-base-point minimum over a fibre net; returns (values, fibre angles)."""
    g = field.group
    active = [j for j in range(g.b) if l[g.a + j] != 0]
    if not active:
        return _opnorm(_two_form(field, l, [None] * g.b)), active, np.zeros((len(field), 0))
    net = fibonacci_sphere(fiber_samples)
    combos = np.stack(np.meshgrid(*[np.arange(fiber_samples)] * len(active), indexing="ij"), -1).reshape(
        -1, len(active)
    )
    best = np.full(len(field), np.inf)
    arg = np.zeros((len(field), len(active)), dtype=int)
    for c in combos:
        fibre = [np.zeros(3)] * g.b
        for slot, j in enumerate(active):
            fibre[j] = net[c[slot]]
        vals = _opnorm(_two_form(field, l, fibre))
        better = vals < best
        best[better] = vals[better]
        arg[better] = c
    angles = np.array([np.concatenate([_angles_from_sphere(net[c]) for c in row]) for row in arg])
    return best, active, angles


def _fibre_from_angles(g, active, t):
    fibre = [np.zeros(3)] * g.b
    for slot, j in enumerate(active):
        fibre[j] = _sphere_from_angles(t[2 * slot : 2 * slot + 2])
    return fibre


def _point_value(field, x, l, active, t):
    sub = CurvatureField(field.group, field.points[x : x + 1], field.values[x : x + 1])
    return float(_opnorm(_two_form(sub, l, _fibre_from_angles(field.group, active, t)))[0])


_NM = {"xatol": 1e-11, "fatol": 1e-15, "maxiter": 6000, "maxfev": 12000}


def f_min_l(field, l, fiber_samples=config.FIBER_SAMPLES, refine=8):
    """min over base points and flag-fibre points of the best curvature pairing.

    With SU(2) factors the fibre (S^2)^b is sampled on a Fibonacci net of
    ``fiber_samples`` points per factor, and the ``refine`` most promising
    base points are then polished by a local Nelder-Mead search.
    """
    if len(field) == 0:
        raise ValidationError("empty curvature field")
    l = _check_direction(field.group, l)
    best, active, angles = _fibre_scan(field, l, fiber_samples)
    result = float(np.min(best))
    if not active:
        return result
    for x in np.argsort(best)[:refine]:
        res = minimize(lambda t: _point_value(field, x, l, active, t), angles[x], method="Nelder-Mead", options=_NM)
        result = min(result, float(res.fun))
    return result


def chamber_net(g, resolution):
    """Deterministic net on S^{d-1} intersected with R^a x R^b_{>=0}."""
    d = g.rank
    if d == 1:
        return np.array([[1.0], [-1.0]]) if g.a == 1 else np.array([[1.0]])
    angle_axes = [np.linspace(0, np.pi, resolution)] * (d - 2)
    angle_axes.append(np.linspace(0, 2 * np.pi, 4 * resolution, endpoint=False))
    grids = np.stack(np.meshgrid(*angle_axes, indexing="ij"), -1).reshape(-1, d - 1)
    pts = np.array([_hyperspherical(t) for t in grids])
    pts = pts[np.all(pts[:, g.a :] >= -1e-15, axis=1)]
    pts[:, g.a :] = np.abs(pts[:, g.a :])
    return np.unique(np.round(pts, 14), axis=0)


def _hyperspherical(t):
    d = len(t) + 1
    out = np.ones(d)
    for i, ang in enumerate(t):
        out[i] *= np.cos(ang)
        out[i + 1 :] *= np.sin(ang)
    return out


def _reflect(g, l):
    l = np.asarray(l, dtype=float).copy()
    l[g.a :] = np.abs(l[g.a :])
    return l / np.linalg.norm(l)


def f_min(field, chamber_resolution=16, fiber_samples=config.FIBER_SAMPLES, polish=4):
    """min over the chamber boundary of f_min_l.

    Net search over the chamber, golden-section sweeps over each chamber
    angle around the best net point, then a joint Nelder-Mead polish over
    (chamber angles, fibre angles) at the ``polish`` best base points; the
    quantity is a plain minimum over (x, l, fibre) so the stages compose.
    """
    chamber_resolution = check_positive_int(chamber_resolution, "chamber_resolution", minimum=8)
    if len(field) == 0:
        raise ValidationError("empty curvature field")
    g = field.group
    net = chamber_net(g, chamber_resolution)
    vals = np.array([f_min_l(field, l, fiber_samples) for l in net])
    best = int(np.argmin(vals))
    if g.rank == 1:
        return float(vals[best])

    d = g.rank
    tol = config.CHAMBER_REFINE_TOL * max(field.scale, 1e-300)
    spacing = np.pi / (chamber_resolution - 1)
    theta = _angles_of(net[best])
    current = float(vals[best])

    def at(t):
        return f_min_l(field, _reflect(g, _hyperspherical(t)), fiber_samples, refine=2)

    for _ in range(10):
        before = current
        for i in range(d - 1):
            def line(s, i=i):
                t = theta.copy()
                t[i] = s
                return at(t)

            r = minimize_scalar(
                line, bounds=(theta[i] - spacing, theta[i] + spacing), method="bounded",
                options={"xatol": 1e-6},
            )
            if r.fun < current:
                current, theta[i] = float(r.fun), float(r.x)
        if before - current <= tol:
            break

    starts = [theta] + [_angles_of(net[i]) for i in np.argsort(vals)[:polish]]
    for t_l in starts:
        l0 = _reflect(g, _hyperspherical(t_l))
        per_x, active, angles = _fibre_scan(field, l0, fiber_samples)
        for x in np.argsort(per_x)[:polish]:
            def joint(z, x=x):
                l = _reflect(g, _hyperspherical(z[: d - 1]))
                act = [j for j in range(g.b) if l[g.a + j] != 0]
                if act != active:
                    return _point_value(field, x, l, [], np.zeros(0)) if not act else np.inf
                return _point_value(field, x, l, active, z[d - 1 :])

            z0 = np.concatenate([t_l, angles[x]])
            res = minimize(joint, z0, method="Nelder-Mead", options=_NM)
            current = min(current, float(res.fun))
    return current


def _angles_of(l):
    d = len(l)
    t = np.zeros(d - 1)
    rest = l.astype(float).copy()
    for i in range(d - 2):
        r = np.linalg.norm(rest[i:])
        t[i] = np.arccos(np.clip(rest[i] / r, -1, 1)) if r > 0 else 0.0
    t[d - 2] = np.arctan2(l[d - 1], l[d - 2])
    return t


def _resolve_point(field, x):
    if isinstance(x, (int, np.integer)):
        if not 0 <= x < len(field):
            raise ValidationError(f"point index {x} not in grid")
        return int(x)
    x = np.asarray(x, dtype=float)
    hits = np.where(np.all(np.isclose(field.points, x, rtol=0, atol=1e-12), axis=1))[0]
    if len(hits) == 0:
        raise ValidationError(f"point {x} not in grid")
    return int(hits[0])


def nondegenerate_at(field, x):
    """True iff {F[x, i, j] : i < j} spans the Lie algebra (relative rank test)."""
    idx = _resolve_point(field, x)
    n = field.base_dim
    iu = np.triu_indices(n, 1)
    rows = field.values[idx][iu]  # (pairs, dim g)
    if rows.size == 0:
        return False
    s = np.linalg.svd(rows, compute_uv=False)
    if s[0] == 0:
        return False
    rank = int(np.sum(s > config.RANK_RTOL * s[0]))
    return rank == field.group.dim


def globally_nondegenerate(field):
    return all(nondegenerate_at(field, x) for x in range(len(field)))
