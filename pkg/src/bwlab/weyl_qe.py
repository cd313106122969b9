"""Weyl-law counts, the eigendata set Omega, QE variances and the twisted flow.

Omega collects pairs (k, lambda) where u is an eigenfunction of the k-th
twisted Laplacian with eigenvalue lambda^2. C(R) is the square
{|k| <= R, lambda <= R}; N(R) counts the Euclidean ball |(k, lambda)| <= R.
"""

import csv
import io
import json
from dataclasses import dataclass, field, replace
from math import gamma

import numpy as np

from . import config
from ._validation import GuardError, ValidationError, check_positive_int, check_real
from .lie_core import weyl_dim
from .spectra import MagneticTorus, U1FlatCircle


def sphere_volume(n):
    """Volume of the unit sphere S^{n-1} in R^n."""
    return 2 * np.pi ** (n / 2) / gamma(n / 2)


def weyl_formula(dk, n, volume, h, a, b):
    """d_k / (2 pi h)^n * vol(M) vol(S^{n-1}) / n * (b^{n/2} - a^{n/2})."""
    return dk / (2 * np.pi * h) ** n * volume * sphere_volume(n) / n * (b ** (n / 2) - a ** (n / 2))


def weyl_count(table, h, a, b, model):
    """Exact count of eigenvalues in [a/h^2, b/h^2] and its ratio to the Weyl formula.

    The table must reach past b/h^2, otherwise the count could be short.
    """
    h = check_real(h, "h", low=0.0, strict_low=True)
    if not (0 <= a <= b):
        raise ValidationError("need 0 <= a <= b")
    lo, hi = a / h**2, b / h**2
    vals = np.asarray(table.eigenvalues)
    if a == b:
        return 0, 0.0
    if len(vals) == 0 or vals[-1] <= hi:
        raise GuardError(f"spectrum table stops at {vals[-1] if len(vals) else 0:.4g} <= b/h^2 = {hi:.4g}")
    count = int(np.sum((vals >= lo) & (vals <= hi)))
    dk = weyl_dim(model.group, table.weight)
    formula = weyl_formula(dk, model.base_dim, model.volume, h, a, b)
    return count, count / formula


def deep_table(model, k, max_eig, grid=None):
    """Spectrum of weight k long enough to contain an eigenvalue above max_eig."""
    count = 8
    kwargs = {} if grid is None else {"grid": grid}
    while True:
        t = model.spectrum(k, count, **kwargs)
        if t.eigenvalues[-1] > max_eig:
            return t
        if isinstance(model, MagneticTorus) and count >= (grid or model.grid) ** 2 // 2:
            raise GuardError("magnetic torus grid cannot resolve eigenvalues that high")
        count *= 2


# --------------------------------------------------------------------------
# Omega


def omega_exponent(base_dim, group):
    """r = dim P - dim(G/T)/2."""
    return base_dim + group.dim - group.flag_dim / 2


@dataclass(frozen=True)
class OmegaEntry:
    weight: object
    lam: float  # square root of the eigenvalue
    multiplicity: int
    vector_index: tuple = ()  # rows of OmegaSet.vectors[weight]


@dataclass
class OmegaSet:
    entries: list
    model: object
    R: float
    vectors: dict = field(default_factory=dict)

    def count_square(self, R=None):
        """#C(R), counted with multiplicity."""
        R = self.R if R is None else R
        return sum(e.multiplicity for e in self.entries if e.weight.norm <= R and e.lam <= R)

    def count_ball(self, R=None):
        """N(R): multiplicity count in the Euclidean ball of (k, lambda)."""
        R = self.R if R is None else R
        return sum(e.multiplicity for e in self.entries if np.hypot(e.weight.norm, e.lam) <= R)

    def to_json(self):
        rows = [
            {
                "weight": e.weight.to_list(),
                "lambda": e.lam,
                "eigenvalue": e.lam**2,
                "h": (1.0 / e.lam) if e.lam > 0 else None,
                "multiplicity": e.multiplicity,
            }
            for e in self.entries
        ]
        return json.dumps(
            {
                "model": type(self.model).__name__,
                "R": self.R,
                "r": omega_exponent(self.model.base_dim, self.model.group),
                "count_square": self.count_square(),
                "count_ball": self.count_ball(),
                "entries": rows,
            },
            sort_keys=True,
        )


def _group_multiplicities(vals, rtol=1e-9):
    groups, start = [], 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or abs(vals[i] - vals[start]) > rtol * max(1.0, abs(vals[start])):
            groups.append((start, i))
            start = i
    return groups


def build_omega(model, R, eigenvectors=False, grid=None):
    """All (k, lambda) with |k| <= R and lambda <= R for the given model."""
    R = check_real(R, "R", low=0.0, strict_low=True)
    entries, vectors = [], {}
    kwargs = {} if grid is None else {"grid": grid}
    for k in model.weights(R):
        if k.norm > R:
            continue
        t = model.spectrum_below(k, R**2, eigenvectors=eigenvectors, **kwargs)
        if eigenvectors:
            if t.eigenvectors is None:
                raise ValidationError("model did not return eigenvectors")
            if t.eigenvectors.shape[1] > config.MAX_STORED_BASIS:
                raise GuardError(f"basis size {t.eigenvectors.shape[1]} exceeds {config.MAX_STORED_BASIS}")
            vectors[k] = t.eigenvectors
        lams = np.sqrt(t.eigenvalues)
        for s, e in _group_multiplicities(t.eigenvalues):
            entries.append(OmegaEntry(k, float(lams[s]), e - s, tuple(range(s, e)) if eigenvectors else ()))
    entries.sort(key=lambda e: (e.weight.norm, e.weight.components, e.lam))
    return OmegaSet(entries, model, R, vectors)


@dataclass(frozen=True)
class OmegaGrowth:
    radii: np.ndarray
    counts: np.ndarray
    slope: float
    constant: float  # C with R^r / C <= #C(R) <= C R^r on the sample
    r: float


def omega_growth(omega, radii):
    """log-log slope of #C(R) and the two-sided constant against R^r."""
    radii = np.asarray(radii, dtype=float)
    if np.any(radii > omega.R):
        raise ValidationError("radii exceed the radius Omega was built to")
    counts = np.array([omega.count_square(R) for R in radii], dtype=float)
    if np.any(counts <= 0):
        raise ValidationError("empty C(R) in the sample")
    slope = float(np.polyfit(np.log(radii), np.log(counts), 1)[0])
    r = omega_exponent(omega.model.base_dim, omega.model.group)
    ratio = counts / radii**r
    C = float(max(ratio.max(), (1 / ratio).max()))
    return OmegaGrowth(radii, counts, slope, C, r)


# --------------------------------------------------------------------------
# Quantum-ergodicity statistics


def base_points(model, grid):
    """Grid coordinates matching the eigenvector layout of ``model``."""
    if isinstance(model, U1FlatCircle):
        return (np.arange(grid) / grid)[:, None]
    if isinstance(model, MagneticTorus):
        lx, ly = model.sides
        i, j = np.meshgrid(np.arange(grid), np.arange(grid), indexing="ij")
        return np.stack([i.ravel() * lx / grid, j.ravel() * ly / grid], axis=-1)
    raise ValidationError(f"no eigenvector grid for {type(model).__name__}")


def matrix_elements(omega, observable, grid=None):
    """<a u, u> for every stored eigenvector, in Omega entry order.

    Returns (weights norms, lambdas, values); each entry of multiplicity m
    contributes its m basis vectors.
    """
    if not omega.vectors:
        raise ValidationError("Omega was built without eigenvectors")
    sample = next(iter(omega.vectors.values()))
    n_basis = sample.shape[1]
    if grid is None:
        grid = n_basis if omega.model.base_dim == 1 else int(round(np.sqrt(n_basis)))
    pts = base_points(omega.model, grid)
    a = observable(pts) if callable(observable) else np.asarray(observable)
    a = np.broadcast_to(np.asarray(a, dtype=complex), (len(pts),))
    cell = omega.model.volume / len(pts)
    norms, lams, vals = [], [], []
    for e in omega.entries:
        V = omega.vectors[e.weight][list(e.vector_index)]
        vals.extend(np.sum(a * np.abs(V) ** 2, axis=1) * cell)
        norms.extend([e.weight.norm] * len(e.vector_index))
        lams.extend([e.lam] * len(e.vector_index))
    avg = np.sum(a) * cell / omega.model.volume
    return np.array(norms), np.array(lams), np.array(vals), avg


def qe_variance(omega, observable, R=None, grid=None):
    """(1/N(R)) sum over the ball |(k, lambda)| <= R of |<a u, u> - avg(a)|^2."""
    R = omega.R if R is None else R
    norms, lams, vals, avg = matrix_elements(omega, observable, grid)
    sel = np.hypot(norms, lams) <= R
    if not sel.any():
        return 0.0
    return float(np.mean(np.abs(vals[sel] - avg) ** 2))


def variance_curve_csv(omega, observable, radii, grid=None):
    norms, lams, vals, avg = matrix_elements(omega, observable, grid)
    dev = np.abs(vals - avg) ** 2
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["R", "N", "variance"])
    for R in radii:
        sel = np.hypot(norms, lams) <= R
        var = float(np.mean(dev[sel])) if sel.any() else 0.0
        w.writerow([repr(float(R)), int(sel.sum()), repr(var)])
    return buf.getvalue()


# --------------------------------------------------------------------------
# Twisted Hamiltonian flow on the flat 2-torus


@dataclass(frozen=True)
class FlowState:
    """Point of the twisted phase space over a flat 2-torus.

    x is the lifted base point (not reduced mod the sides), theta the fibre
    angle, xi the horizontal momentum. The symplectic form is the standard
    one plus h k F dx1 ^ dx2, F the curvature per unit weight.
    """

    x: tuple
    xi: tuple
    theta: float = 0.0
    h: float = 1.0
    k: int = 0
    curvature: float = 0.0
    t: float = 0.0

    @property
    def field_strength(self):
        return self.h * self.k * self.curvature

    @property
    def energy(self):
        return float(self.xi[0] ** 2 + self.xi[1] ** 2)

    def cyclotron_radius(self):
        """|xi| / B_eff: xi turns at angular speed 2 B_eff while |x'| = 2 |xi|."""
        B = self.field_strength
        return float("inf") if B == 0 else float(np.sqrt(self.energy) / abs(B))


def _check_dt(state, dt):
    dt = check_real(dt, "dt", low=0.0, strict_low=True)
    p = state.energy
    if p > 0 and dt > 1e-2 / np.sqrt(p):
        raise ValidationError(f"dt = {dt} exceeds 1e-2 / sqrt(energy)")
    return dt


def _step(x0, x1, xi0, xi1, theta, B, F_theta, dt):
    # drift half step, magnetic rotation, drift half step; p = |xi|^2 so x' = 2 xi
    y0 = x0 + xi0 * dt
    y1 = x1 + xi1 * dt
    t = B * dt
    c = (1.0 - t * t) / (1.0 + t * t)
    s = 2.0 * t / (1.0 + t * t)
    n0 = c * xi0 + s * xi1
    n1 = c * xi1 - s * xi0
    z0 = y0 + n0 * dt
    z1 = y1 + n1 * dt
    # horizontal lift in the Landau gauge A = F x1 dx2
    theta = theta - F_theta * y0 * (z1 - x1)
    return z0, z1, n0, n1, theta


def hamiltonian_step(state, dt):
    """One Strang step: drift, exact-energy magnetic rotation, drift.

    The rotation of xi is the Cayley map with tan(angle/2) = B_eff dt, so
    the full-step positions lie on a circle of radius |xi|/B_eff exactly.
    At k = 0 the rotation is the identity bit-for-bit.
    """
    dt = _check_dt(state, dt)
    B = state.field_strength
    z0, z1, n0, n1, th = _step(
        state.x[0], state.x[1], state.xi[0], state.xi[1], state.theta, B, state.k * state.curvature, dt
    )
    return replace(state, x=(z0, z1), xi=(n0, n1), theta=th, t=state.t + dt)


def integrate(state, dt, steps, record_every=1):
    """Run ``steps`` steps; returns (final state, times, positions, momenta) at the recorded steps."""
    dt = _check_dt(state, dt)
    steps = check_positive_int(steps, "steps", minimum=0)
    record_every = check_positive_int(record_every, "record_every")
    B = state.field_strength
    Fk = state.k * state.curvature
    x0, x1 = float(state.x[0]), float(state.x[1])
    p0, p1 = float(state.xi[0]), float(state.xi[1])
    th = float(state.theta)
    n_rec = steps // record_every + 1
    times = np.empty(n_rec)
    X = np.empty((n_rec, 2))
    P = np.empty((n_rec, 2))
    times[0], X[0], P[0] = state.t, (x0, x1), (p0, p1)
    r = 1
    for n in range(1, steps + 1):
        x0, x1, p0, p1, th = _step(x0, x1, p0, p1, th, B, Fk, dt)
        if n % record_every == 0:
            times[r] = state.t + n * dt
            X[r] = (x0, x1)
            P[r] = (p0, p1)
            r += 1
    final = replace(state, x=(x0, x1), xi=(p0, p1), theta=th, t=state.t + steps * dt)
    return final, times, X, P


def time_average(observable, state, T, dt):
    """Trapezoidal (1/T) int_0^T b(x(t)) dt along the integrated orbit."""
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * T:
        raise ValidationError("T must be a positive multiple of dt")
    _, _, X, _ = integrate(state, dt, steps)
    b = np.asarray(observable(X), dtype=complex)
    b = np.broadcast_to(b, (len(X),))
    return complex(dt * (b.sum() - 0.5 * (b[0] + b[-1])) / T)


def flow_trace_csv(times, X, P):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x0", "x1", "xi0", "xi1"])
    for t, x, p in zip(times, X, P):
        w.writerow([repr(float(t)), repr(float(x[0])), repr(float(x[1])), repr(float(p[0])), repr(float(p[1]))])
    return buf.getvalue()
