"""Spectra of the twisted Laplacians on the explicit model bundles.

Three models are implemented:

* ``U1FlatCircle``: the circle bundle over R/Z glued by (x+1, theta) ~ (x, theta + alpha),
  whose k-th twisted Laplacian has spectrum {4 pi^2 (k alpha + q)^2 : q in Z}.
* ``SU2FlatCircle``: a flat SU(2) bundle over the unit circle with holonomy g.
* ``MagneticTorus``: a U(1) bundle over a flat torus with constant curvature
  2 pi m per unit weight, discretized with unitary link variables.

Closed forms are used where they exist; finite-difference eigensolves give
the discretized counterparts and serve as independent checks.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh
from sklearn.base import BaseEstimator

from . import config
from . import quaternion as quat
from ._validation import GuardError, ValidationError, check_positive_int
from .harmonic import su2_rep_matrix
from .lie_core import GroupSpec, Weight

TWO_PI = 2 * np.pi
FOUR_PI_SQ = 4 * np.pi**2


def _frac(x):
    """Fractional part in [0, 1); exact for Fraction and int inputs."""
    if isinstance(x, (Fraction, int)):
        return Fraction(x) - floor(x)
    return float(x) - np.floor(float(x))


def _clamp(vals):
    vals = np.asarray(vals, dtype=float)
    vals = np.where((vals < 0) & (vals > -config.EIGENVALUE_CLAMP), 0.0, vals)
    if np.any(vals < 0):
        raise GuardError(f"negative eigenvalue {vals.min():.3g} beyond round-off")
    return vals


@dataclass
class SpectrumTable:
    weight: Weight
    eigenvalues: np.ndarray
    provenance: dict = field(default_factory=lambda: {"kind": "exact"})
    eigenvectors: np.ndarray = None  # (count, n_basis) when stored

    def __post_init__(self):
        self.eigenvalues = _clamp(self.eigenvalues)
        order = np.argsort(self.eigenvalues, kind="stable")
        self.eigenvalues = self.eigenvalues[order]
        if self.eigenvectors is not None:
            self.eigenvectors = np.asarray(self.eigenvectors)[order]

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def lambda1(self):
        """Smallest eigenvalue; for the zero weight, the smallest nonzero one."""
        if not self.weight.is_zero():
            return float(self.eigenvalues[0])
        scale = max(1.0, float(self.eigenvalues[-1]))
        nonzero = self.eigenvalues[self.eigenvalues > 1e-9 * scale]
        return float(nonzero[0]) if len(nonzero) else float("nan")

    def provenance_label(self):
        if self.provenance.get("kind") == "exact":
            return "exact"
        return f"discretized(grid={self.provenance.get('grid')},scheme={self.provenance.get('scheme')})"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        comps = self.weight.components
        w.writerow([f"k{i}" for i in range(len(comps))] + ["index", "eigenvalue", "provenance"])
        label = self.provenance_label()
        for i, lam in enumerate(self.eigenvalues):
            w.writerow(list(comps) + [i, repr(float(lam)), label])
        return buf.getvalue()

    def to_json(self):
        return json.dumps(
            {
                "weight": self.weight.to_list(),
                "eigenvalues": [float(v) for v in self.eigenvalues],
                "lambda1": self.lambda1,
                "provenance": self.provenance,
            },
            sort_keys=True,
        )


# --------------------------------------------------------------------------
# U(1) flat circle


def u1_flat_circle_spectrum(alpha, k, count, grid=None):
    """The ``count`` smallest values of 4 pi^2 (k alpha + q)^2, q in Z.

    ``alpha`` may be a Fraction, in which case k alpha mod 1 is computed
    exactly (needed for the huge k of Liouville witnesses). If ``grid`` is
    given, the plane-wave eigenfunctions are sampled on ``grid`` points and
    stored with unit L^2 norm.
    """
    count = check_positive_int(count, "count")
    s = _frac(_frac(alpha) * k if isinstance(alpha, (Fraction, int)) else float(alpha) * k)
    s = float(s)
    qs = np.arange(-(count // 2) - 2, count // 2 + 3)
    freqs = s + qs
    order = np.lexsort((qs, np.abs(freqs)))[:count]
    freqs = freqs[order]
    vecs = None
    if grid is not None:
        x = np.arange(grid) / grid
        vecs = np.exp(2j * np.pi * np.outer(freqs, x))
    return SpectrumTable(Weight((k,), ()), FOUR_PI_SQ * freqs**2, {"kind": "exact"}, vecs)


def _periodic_chain(n, wrap):
    """Sparse -d^2/dx^2 on n points of [0, 1) with the last link twisted by ``wrap``.

    ``wrap`` is a d x d unitary; the result acts on C^{n d}. Ordering is site-major.
    """
    d = wrap.shape[0]
    h2 = float(n) ** 2
    eye = sp.identity(d, format="csr", dtype=complex)
    shift = sp.diags([np.ones(n - 1)], [1], shape=(n, n), format="csr")
    hop = sp.kron(shift, eye, format="csr")
    corner = sp.csr_matrix(([1.0], ([n - 1], [0])), shape=(n, n))
    hop = hop + sp.kron(corner, sp.csr_matrix(wrap), format="csr")
    lap = 2.0 * sp.identity(n * d, format="csr", dtype=complex) - hop - hop.conj().T
    return (lap * h2).tocsc()


def _lowest_eigs(H, count, vectors=False):
    n = H.shape[0]
    if n <= 400:
        dense = H.toarray()
        vals, vecs = np.linalg.eigh(dense)
        return (vals[:count], vecs[:, :count]) if vectors else vals[:count]
    res = eigsh(H, k=count, sigma=-1.0, which="LM", return_eigenvectors=vectors)
    if vectors:
        # eigsh does not orthogonalize inside degenerate eigenspaces; a
        # Rayleigh-Ritz pass on the orthonormalized block restores that
        Q, _ = np.linalg.qr(res[1])
        vals, Y = np.linalg.eigh(Q.conj().T @ (H @ Q))
        return vals, Q @ Y
    return np.sort(res)


def u1_flat_circle_fd_spectrum(alpha, k, grid, count):
    """Finite-difference eigensolve of the twisted circle Laplacian.

    The holonomy e^{2 pi i k alpha} sits on a single link (gauge-equivalent to
    any other distribution of the connection form).
    """
    grid = check_positive_int(grid, "grid", minimum=4)
    s = float(_frac(_frac(alpha) * k if isinstance(alpha, (Fraction, int)) else float(alpha) * k))
    wrap = np.array([[np.exp(TWO_PI * 1j * s)]])
    vals = _lowest_eigs(_periodic_chain(grid, wrap), count)
    return SpectrumTable(
        Weight((k,), ()), vals, {"kind": "discretized", "grid": grid, "scheme": "central-2"}
    )


# --------------------------------------------------------------------------
# SU(2) flat circle


def su2_flat_circle_spectrum(g, k, count):
    """Spectrum of the flat SU(2) bundle over R/Z with holonomy g at weight k.

    rho_k(g) has eigen-angles (k - 2j) phi, j = 0..k, where phi is the
    rotation angle of g; each contributes {4 pi^2 ((k-2j) phi / 2 pi + q)^2}.
    """
    count = check_positive_int(count, "count")
    if k < 0:
        raise ValidationError("SU(2) weights are nonnegative")
    phi = float(quat.rotation_angle(quat.normalize(g)))
    vals = []
    for j in range(k + 1):
        s = ((k - 2 * j) * phi / TWO_PI) % 1.0
        qs = np.arange(-(count // 2) - 2, count // 2 + 3)
        vals.append(FOUR_PI_SQ * (s + qs) ** 2)
    vals = np.sort(np.concatenate(vals))[:count]
    return SpectrumTable(Weight((), (k,)), vals)


def su2_flat_circle_fd_spectrum(g, k, grid, count):
    """Block finite-difference eigensolve of the rank-(k+1) flat system on the circle."""
    wrap = su2_rep_matrix(k, quat.normalize(g))
    vals = _lowest_eigs(_periodic_chain(grid, wrap), count)
    return SpectrumTable(
        Weight((), (k,)), vals, {"kind": "discretized", "grid": grid, "scheme": "central-2"}
    )


# --------------------------------------------------------------------------
# Magnetic torus


def magnetic_torus_operator(m, k, grid, sides=(1.0, 1.0)):
    """Sparse gauge-covariant Laplacian (nabla_k)^* nabla_k on the torus.

    Landau gauge with link phases: y-links in column i carry phi * i, and
    the x-links closing column N-1 -> 0 carry -phi * N * j, so every
    plaquette encloses phi = 2 pi m k / N^2 and the total flux is 2 pi m k.
    """
    n = grid
    lx, ly = sides
    hx2, hy2 = (lx / n) ** 2, (ly / n) ** 2
    phi = TWO_PI * m * k / n**2
    idx = np.arange(n * n).reshape(n, n)  # idx[i, j], i along x
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    # x hops (i, j) -> (i+1, j)
    ax = np.where(i == n - 1, -phi * n * j, 0.0)
    rows_x = idx.ravel()
    cols_x = idx[(i + 1) % n, j].ravel()
    vals_x = -np.exp(1j * ax).ravel() / hx2
    # y hops (i, j) -> (i, j+1)
    ay = phi * i
    cols_y = idx[i, (j + 1) % n].ravel()
    vals_y = -np.exp(1j * ay).ravel() / hy2
    hop = sp.csr_matrix(
        (np.concatenate([vals_x, vals_y]), (np.concatenate([rows_x, rows_x]), np.concatenate([cols_x, cols_y]))),
        shape=(n * n, n * n),
    )
    diag = sp.identity(n * n, dtype=complex, format="csr") * (2.0 / hx2 + 2.0 / hy2)
    return (diag + hop + hop.conj().T).tocsc()


def magnetic_torus_spectrum(m, k, grid, count, sides=(1.0, 1.0), eigenvectors=False):
    """Lowest eigenvalues of the discretized magnetic Laplacian at weight k.

    The continuum lowest level is the Landau level 2 pi m |k| / area with
    multiplicity m |k|. Eigenvectors, when requested, are normalized in
    L^2 of the torus (sum |u|^2 dA = 1) and stored row-wise.
    """
    m = check_positive_int(m, "m")
    grid = check_positive_int(grid, "grid", minimum=4)
    count = check_positive_int(count, "count")
    kk = abs(int(k))
    need = config.MAGNETIC_GRID_FACTOR * np.sqrt(m * kk)
    if grid < need:
        raise GuardError(f"grid {grid} too coarse for m*k = {m * kk}; need >= {need:.1f}")
    H = magnetic_torus_operator(m, kk, grid, sides)
    res = _lowest_eigs(H, count, vectors=eigenvectors)
    vecs = None
    if eigenvectors:
        vals, raw = res
        cell = sides[0] * sides[1] / grid**2
        vecs = (raw / np.sqrt(cell)).T
    else:
        vals = res
    return SpectrumTable(
        Weight((int(k),), ()),
        vals,
        {"kind": "discretized", "grid": grid, "scheme": "link-variable-2"},
        vecs,
    )


# --------------------------------------------------------------------------
# Model bundles


@dataclass(frozen=True)
class U1FlatCircle:
    alpha: object = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frac(self.alpha))

    group = GroupSpec(1, 0)
    base_dim = 1
    volume = 1.0
    total_dim = 2

    def weights(self, radius):
        r = int(floor(radius))
        return [Weight((k,), ()) for k in range(-r, r + 1)]

    def spectrum(self, k, count, eigenvectors=False, grid=256):
        return u1_flat_circle_spectrum(self.alpha, k.circle_part[0], count, grid if eigenvectors else None)

    def spectrum_below(self, k, max_eig, eigenvectors=False, grid=256):
        """All eigenvalues <= max_eig (closed form, so no truncation risk)."""
        n = int(np.sqrt(max_eig) / np.pi) + 4
        t = self.spectrum(k, n, eigenvectors, grid)
        keep = t.eigenvalues <= max_eig
        vecs = None if t.eigenvectors is None else t.eigenvectors[keep]
        return SpectrumTable(t.weight, t.eigenvalues[keep], t.provenance, vecs)


@dataclass(frozen=True)
class SU2FlatCircle:
    holonomy: tuple = (1.0, 0.0, 0.0, 0.0)

    group = GroupSpec(0, 1)
    base_dim = 1
    volume = 1.0
    total_dim = 4

    def weights(self, radius):
        return [Weight((), (k,)) for k in range(int(floor(radius)) + 1)]

    def spectrum(self, k, count, eigenvectors=False, grid=256):
        if eigenvectors:
            raise ValidationError("eigenvectors are not stored for the SU(2) flat circle")
        return su2_flat_circle_spectrum(np.asarray(self.holonomy), k.su2_part[0], count)

    def spectrum_below(self, k, max_eig, eigenvectors=False, grid=256):
        n = (k.su2_part[0] + 1) * (int(np.sqrt(max_eig) / np.pi) + 4)
        t = self.spectrum(k, n)
        return SpectrumTable(t.weight, t.eigenvalues[t.eigenvalues <= max_eig], t.provenance)


@dataclass(frozen=True)
class MagneticTorus:
    m: int = 1
    grid: int = 64
    sides: tuple = (1.0, 1.0)

    group = GroupSpec(1, 0)
    base_dim = 2
    total_dim = 3

    @property
    def volume(self):
        return self.sides[0] * self.sides[1]

    def flux(self, k):
        """Total curvature flux of the k-th associated line bundle."""
        return TWO_PI * self.m * k

    def weights(self, radius):
        r = int(floor(radius))
        return [Weight((k,), ()) for k in range(-r, r + 1)]

    def spectrum(self, k, count, eigenvectors=False, grid=None):
        return magnetic_torus_spectrum(
            self.m, k.circle_part[0], grid or self.grid, count, self.sides, eigenvectors
        )

    def spectrum_below(self, k, max_eig, eigenvectors=False, grid=None):
        # Weyl estimate for the count, then grow until the table passes max_eig
        count = int(max_eig * self.volume / (4 * np.pi) * 1.3) + 8
        n_basis = (grid or self.grid) ** 2
        while True:
            count = min(count, n_basis - 2)
            t = self.spectrum(k, count, eigenvectors, grid)
            if t.eigenvalues[-1] > max_eig or count >= n_basis - 2:
                break
            count *= 2
        keep = t.eigenvalues <= max_eig
        vecs = None if t.eigenvectors is None else t.eigenvectors[keep]
        return SpectrumTable(t.weight, t.eigenvalues[keep], t.provenance, vecs)


# --------------------------------------------------------------------------
# Liouville counterexample


def liouville_exponents(J):
    """Exponents e_1 = 1, e_2 = 2, e_{j+1} = (j+1) e_j + 1."""
    e = [1, 2]
    for j in range(2, J):
        e.append((j + 1) * e[-1] + 1)
    return e[:J]


@dataclass(frozen=True)
class LiouvilleWitness:
    j: int
    k: int
    p: int
    residual: Fraction  # |k alpha + p|
    bound: Fraction  # k^{-j}

    @property
    def holds(self):
        return self.residual <= self.bound


@dataclass(frozen=True)
class LiouvilleData:
    J: int
    alpha: Fraction
    witnesses: tuple


def liouville_alpha(J):
    """Truncated Liouville number alpha_J = sum_{j<=J} 2^{-e_j} with its witnesses.

    Witnesses are k_j = 2^{e_j}, p_j = -round(k_j alpha_J) for j = 2..J; the
    exponent recursion guarantees |k_j alpha_J + p_j| < k_j^{-j}, checked in
    exact rational arithmetic.
    """
    J = check_positive_int(J, "J", minimum=2)
    if J > 8:
        raise ValidationError("J must be <= 8")
    exps = liouville_exponents(J)
    alpha = sum((Fraction(1, 2**e) for e in exps), Fraction(0))
    wits = []
    for j in range(2, J + 1):
        k = 2 ** exps[j - 1]
        p = -round(k * alpha)
        wits.append(LiouvilleWitness(j, k, p, abs(k * alpha + p), Fraction(1, k**j)))
    return LiouvilleData(J, alpha, tuple(wits))


def lambda1_series(alpha, ks):
    """(k, lambda_1(k)) on the U(1) flat circle for each k in ``ks``."""
    return [(k, u1_flat_circle_spectrum(alpha, k, 1).lambda1) for k in ks]


# --------------------------------------------------------------------------
# Growth classification


@dataclass(frozen=True)
class Linear:
    slope: float
    fit_error: float


@dataclass(frozen=True)
class PolyLower:
    nu: float
    C: float
    fit_error: float


@dataclass(frozen=True)
class SubPolynomial:
    evidence: tuple  # ((|k|, lambda_1), ...) below every polynomial envelope fitted earlier


def _record_lows(norms, lams):
    out, best = [], np.inf
    for n, lam in zip(norms, lams):
        if lam < best:
            out.append((n, lam))
            best = lam
    return out


def classify_growth(pairs):
    """Diagnose the growth of lambda_1 along |k|.

    Linear: least-squares slope of lambda_1 against |k| is positive and the
    rms residual is below ``LINEAR_MAX_REL_RESIDUAL`` times the mean.

    Otherwise a polynomial envelope C |k|^{-nu} is fitted (log-log least
    squares) to the leading share of the record lows, lowered to pass under
    them and by ``ENVELOPE_SLACK``. If every pair stays above it the result
    is PolyLower; the pairs that fall below (including lambda_1 = 0) are
    returned as SubPolynomial evidence.
    """
    pairs = sorted((float(n), float(lam)) for n, lam in pairs)
    norms = np.array([p[0] for p in pairs])
    lams = np.array([p[1] for p in pairs])
    if len(np.unique(norms)) < config.MIN_CLASSIFY_PAIRS or len(norms) != len(np.unique(norms)):
        raise ValidationError(f"need >= {config.MIN_CLASSIFY_PAIRS} pairs with distinct |k|")
    if np.any(norms <= 0) or np.any(lams < 0):
        raise ValidationError("pairs need |k| > 0 and lambda_1 >= 0")

    A = np.vstack([norms, np.ones_like(norms)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, lams, rcond=None)
    resid = lams - A @ np.array([slope, icpt])
    mean = np.mean(lams)
    rel = np.sqrt(np.mean(resid**2)) / mean if mean > 0 else np.inf
    if slope > 0 and rel < config.LINEAR_MAX_REL_RESIDUAL:
        return Linear(float(slope), float(rel))

    records = [(n, lam) for n, lam in _record_lows(norms, lams)]
    positive = [(n, lam) for n, lam in records if lam > 0]
    n_cal = max(2, int(np.ceil(config.ENVELOPE_CALIBRATION_FRACTION * len(records))))
    cal = positive[: min(n_cal, len(positive))]
    if len(cal) < 2:
        zeros = tuple((n, lam) for n, lam in pairs if lam == 0)
        return SubPolynomial(zeros or tuple(records))
    x = np.log([c[0] for c in cal])
    y = np.log([c[1] for c in cal])
    B = np.vstack([x, np.ones_like(x)]).T
    (s, b), *_ = np.linalg.lstsq(B, y, rcond=None)
    fit_err = float(np.sqrt(np.mean((y - B @ np.array([s, b])) ** 2)))
    b_env = b + min(0.0, float(np.min(y - (s * x + b)))) + np.log(config.ENVELOPE_SLACK)
    nu = -float(s)
    with np.errstate(divide="ignore"):
        below = [(n, lam) for n, lam in pairs if lam <= 0 or np.log(lam) < -nu * np.log(n) + b_env]
    if below:
        return SubPolynomial(tuple(below))
    return PolyLower(nu, float(np.exp(b_env)), fit_err)


class GrowthClassifier(BaseEstimator):
    """Estimator wrapper around :func:`classify_growth`.

    ``fit(norms, lambda1)`` stores the diagnosis in ``result_``;
    ``predict(norms)`` evaluates the fitted lower envelope (slope |k| for
    Linear, C |k|^-nu for PolyLower, zeros for SubPolynomial).
    """

    def fit(self, X, y):
        X = np.asarray(X, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.shape != y.shape:
            raise ValidationError("norms and lambda_1 values must have the same length")
        self.result_ = classify_growth(zip(X, y))
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=float).reshape(-1)
        r = self.result_
        if isinstance(r, Linear):
            return r.slope * X
        if isinstance(r, PolyLower):
            return r.C * X ** (-r.nu)
        return np.zeros_like(X)
