"""Declared numerical thresholds.

The growth classifier and the other diagnostics only see finite data.
These constants are the decision rules; change them here, not inline.
"""

# classify_growth
LINEAR_MAX_REL_RESIDUAL = 0.1  # rms residual / mean lambda_1 for a linear fit
MIN_CLASSIFY_PAIRS = 8
ENVELOPE_SLACK = 0.1  # polynomial envelope is lowered by this factor before testing
ENVELOPE_CALIBRATION_FRACTION = 0.5  # leading share of record lows used to fit the envelope

# spectra
EIGENVALUE_CLAMP = 1e-10
MAGNETIC_GRID_FACTOR = 16  # grid >= 16 sqrt(m |k|)

# curvature
RANK_RTOL = 1e-10
FIBER_SAMPLES = 64
CHAMBER_REFINE_TOL = 1e-4

# diophantine
DEDUP_TOL = 1e-9
SU2_MAX_LENGTH = 12
NET_GUARD_FACTOR = 4.0  # net spacing must be < radius / 4

# dynamics
MIN_CORRELATION_SAMPLES = 10_000
CORRELATION_CHUNK = 65_536
STDERR_FACTOR = 3.0

# weyl_qe
MAX_STORED_BASIS = 10_000
