"""B-spline airfoil parametrization and surface-pressure evaluation.

The design vector stacks 15 lower-surface and 15 upper-surface spline
coefficients. Original optimization bounds scale the symmetric-baseline
coefficients by a factor gamma. Pressure distributions come either from the
built-in analytic mock (deterministic pseudo-pressure from geometry, for
hermetic testing) or from an external solver process speaking a
newline-delimited JSON protocol.
"""

from __future__ import annotations

import json
import subprocess
import sys
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline, make_lsq_spline

from .core import Array, Bounds, EvaluationFailure, as_vector

SPLINE_DEGREE = 5
COEFFS_PER_SURFACE = 15
BOUND_MARGIN = 1e-5
GAMMA_DEFAULT = 3.0

# Flow constants carried by the evaluator protocol.
REYNOLDS = 5e7
ALPHA_DEG = 4.0
MACH = 0.0

HF_SAMPLES = 300
LF_SAMPLES = 100


def naca0012_points(n_per_surface: int = 160) -> tuple[Array, Array, Array]:
    """Closed-trailing-edge NACA0012 surfaces on cosine-spaced abscissae."""
    beta = np.linspace(0.0, np.pi, n_per_surface)
    x = 0.5 * (1.0 - np.cos(beta))
    t = 0.12
    y = 5.0 * t * (
        0.2969 * np.sqrt(x)
        - 0.1260 * x
        - 0.3516 * x**2
        + 0.2843 * x**3
        - 0.1036 * x**4
    )
    return x, y, -y


@dataclass(frozen=True)
class SplineBasis:
    """Clamped B-spline basis, frozen for the whole optimization."""

    knots: Array
    degree: int = SPLINE_DEGREE

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if np.any(np.diff(k) < 0):
            raise ValueError("knot vector must be non-decreasing")
        object.__setattr__(self, "knots", k)

    @property
    def n_coeffs(self) -> int:
        return self.knots.size - self.degree - 1

    def evaluate(self, coeffs: Array, x: Array) -> Array:
        c = as_vector(coeffs, "spline coefficients")
        if c.size != self.n_coeffs:
            raise ValueError(f"basis expects {self.n_coeffs} coefficients")
        return BSpline(self.knots, c, self.degree)(np.asarray(x, dtype=float))

    @classmethod
    def default(cls) -> "SplineBasis":
        # Interior knots clustered hard toward the leading edge (quartic law)
        # to resolve the sqrt-type nose, sized so each surface carries exactly
        # COEFFS_PER_SURFACE coefficients.
        n_interior = COEFFS_PER_SURFACE - SPLINE_DEGREE - 1
        interior = (np.arange(1, n_interior + 1) / (n_interior + 1)) ** 4
        knots = np.concatenate(
            [np.zeros(SPLINE_DEGREE + 1), interior, np.ones(SPLINE_DEGREE + 1)]
        )
        return cls(knots=knots)


COEFF_FLOOR = 1e-6


def fit_baseline(
    points: tuple[Array, Array, Array], basis: SplineBasis | None = None
) -> tuple[SplineBasis, Array, Array]:
    """Least-squares spline coefficients of the baseline surfaces.

    Returns (basis, lower coefficients, upper coefficients). Coefficients that
    the fit places within COEFF_FLOOR of zero (the closed-edge endpoints) are
    nudged to +/-COEFF_FLOOR so the upper set stays strictly positive and the
    lower set strictly negative; the baseline then sits strictly inside its
    own scaled bounds.
    """
    x, y_upper, y_lower = points
    x = as_vector(x, "abscissae")
    if x.size < 100:
        raise ValueError("need at least 100 points per surface")
    if basis is None:
        basis = SplineBasis.default()
    order = np.argsort(x)
    xs = x[order]
    c_upper = np.asarray(
        make_lsq_spline(xs, np.asarray(y_upper)[order], basis.knots, basis.degree).c
    )
    c_lower = np.asarray(
        make_lsq_spline(xs, np.asarray(y_lower)[order], basis.knots, basis.degree).c
    )
    c_upper = np.maximum(c_upper, COEFF_FLOOR)
    c_lower = np.minimum(c_lower, -COEFF_FLOOR)
    return basis, c_lower, c_upper


def original_bounds(
    c_lower0012: Array, c_upper0012: Array, gamma: float = GAMMA_DEFAULT
) -> Bounds:
    """Scaled baseline coefficient box: [gamma*(c_l - margin), 0] for the 15
    lower dims and [0, gamma*(c_u + margin)] for the 15 upper dims."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    cl = as_vector(c_lower0012, "lower coefficients")
    cu = as_vector(c_upper0012, "upper coefficients")
    lower = np.concatenate([gamma * (cl - BOUND_MARGIN), np.zeros(cu.size)])
    upper = np.concatenate([np.zeros(cl.size), gamma * (cu + BOUND_MARGIN)])
    return Bounds(lower, upper)


def split_design(design: Array) -> tuple[Array, Array]:
    x = as_vector(design, "design")
    if x.size % 2 != 0:
        raise ValueError("design vector must stack two equal coefficient blocks")
    half = x.size // 2
    return x[:half], x[half:]


def realize_geometry(
    design: Array, basis: SplineBasis, n_points: int = 200
) -> tuple[Array, bool]:
    """Surface coordinates for a coefficient vector.

    Returns a closed loop ordered trailing edge -> upper surface -> leading
    edge -> lower surface -> trailing edge, plus a validity flag that is False
    when the surfaces cross (upper below lower anywhere).
    """
    c_lower, c_upper = split_design(design)
    beta = np.linspace(0.0, np.pi, n_points)
    x = 0.5 * (1.0 - np.cos(beta))
    y_upper = basis.evaluate(c_upper, x)
    y_lower = basis.evaluate(c_lower, x)
    valid = bool(np.all(y_upper - y_lower >= -1e-9))
    coords = np.concatenate(
        [
            np.column_stack([x[::-1], y_upper[::-1]]),
            np.column_stack([x[1:], y_lower[1:]]),
        ]
    )
    return coords, valid


@dataclass(frozen=True)
class CpDistribution:
    """Surface pressure samples along the arc parameter.

    The arc parameter runs 0 -> 0.5 over the upper surface (trailing edge to
    leading edge) and 0.5 -> 1 over the lower surface (leading edge back).
    """

    s: Array
    cp: Array

    def __post_init__(self):
        s = as_vector(self.s, "locations")
        cp = as_vector(self.cp, "cp")
        if s.size != cp.size:
            raise ValueError("locations/cp length mismatch")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "cp", cp)


def interpolate_cp(computed: CpDistribution, target_locations) -> Array:
    """Piecewise-linear re-interpolation of a pressure distribution."""
    if computed.s.size < 2:
        raise ValueError("need at least two computed samples")
    t = as_vector(target_locations, "target locations")
    return np.interp(t, computed.s, computed.cp)


def _surfaces_from_coords(coords: Array) -> tuple[Array, Array, Array, Array]:
    """Split a closed TE->upper->LE->lower->TE loop into x-sorted branches."""
    c = np.asarray(coords, dtype=float)
    if c.ndim != 2 or c.shape[1] != 2 or c.shape[0] < 5:
        raise EvaluationFailure("malformed airfoil coordinates")
    le = int(np.argmin(c[:, 0]))
    upper = c[: le + 1][::-1]
    lower = c[le:]
    return upper[:, 0], upper[:, 1], lower[:, 0], lower[:, 1]


# Pseudo-pressure constants: local thickness suction, bulk (integrated)
# thickness suction, camber-slope asymmetry, panel-coarseness smoothing
# passes at low fidelity.
MOCK_THICKNESS_GAIN = 2.0
MOCK_BULK_GAIN = 8.0
MOCK_CAMBER_GAIN = 1.0
MOCK_LF_SMOOTHING_PASSES = 2


def mock_pressure_from_coords(
    coords: Array, fidelity: str, aoa_deg: float = ALPHA_DEG
) -> tuple[Array, Array]:
    """Deterministic analytic pseudo-pressure from geometry (test plumbing).

    Suction combines the local thickness through a mid-chord bump with the
    chord-integrated thickness, and the camber-line slope splits upper and
    lower surfaces. A flat plate maps to identically zero pressure. Low
    fidelity samples fewer points and smooths them, mimicking a coarse panel
    discretization.
    """
    fidelity = fidelity.upper()
    if fidelity not in ("HF", "LF"):
        raise EvaluationFailure(f"unknown fidelity {fidelity!r}")
    n_samples = HF_SAMPLES if fidelity == "HF" else LF_SAMPLES

    xu, yu, xl, yl = _surfaces_from_coords(coords)
    half = n_samples // 2
    beta = np.linspace(0.0, np.pi, half)
    x = 0.5 * (1.0 - np.cos(beta))
    up = np.interp(x, xu, yu)
    lo = np.interp(x, xl, yl)

    thickness = up - lo
    camber = 0.5 * (up + lo)
    slope = np.gradient(camber, x, edge_order=1)
    bump = 4.0 * x * (1.0 - x)
    bulk = np.trapz(thickness, x)
    suction = MOCK_THICKNESS_GAIN * thickness * bump + MOCK_BULK_GAIN * bulk * bump
    twist = MOCK_CAMBER_GAIN * slope * bump * np.sin(np.radians(aoa_deg)) / np.sin(
        np.radians(ALPHA_DEG)
    )
    cp_upper = -(suction + twist)
    cp_lower = -(suction - twist)

    if fidelity == "LF":
        kernel = np.array([0.25, 0.5, 0.25])
        for _ in range(MOCK_LF_SMOOTHING_PASSES):
            cp_upper = np.convolve(np.pad(cp_upper, 1, mode="edge"), kernel, "valid")
            cp_lower = np.convolve(np.pad(cp_lower, 1, mode="edge"), kernel, "valid")

    s_upper = (1.0 - x[::-1]) / 2.0
    s_lower = 0.5 + x / 2.0
    s = np.concatenate([s_upper, s_lower])
    cp = np.concatenate([cp_upper[::-1], cp_lower])
    return s, cp


def encode_request(coords: Array, fidelity: str) -> str:
    return json.dumps(
        {
            "coords": np.asarray(coords, dtype=float).tolist(),
            "fidelity": fidelity.upper(),
            "re": REYNOLDS,
            "aoa": ALPHA_DEG,
            "mach": MACH,
        }
    )


def serve_mock_evaluator(stdin=None, stdout=None) -> None:
    """Protocol server: one JSON request per line, one JSON response per line."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            s, cp = mock_pressure_from_coords(
                np.asarray(req["coords"], dtype=float),
                req.get("fidelity", "HF"),
                float(req.get("aoa", ALPHA_DEG)),
            )
            resp = {"s": s.tolist(), "cp": cp.tolist()}
        except Exception as exc:  # malformed request -> protocol error object
            resp = {"error": str(exc)}
        stdout.write(json.dumps(resp) + "\n")
        stdout.flush()


SERVER_COMMAND = [sys.executable, "-c", "from mfinverse.airfoil import serve_mock_evaluator; serve_mock_evaluator()"]


class AirfoilEvaluator:
    """Pressure evaluator for coefficient designs at a fixed fidelity.

    backend "mock" computes in-process; backend "external" round-trips the
    JSON protocol through a child process (one per evaluation). Evaluation
    failures surface as EvaluationFailure for the caller to score.
    """

    def __init__(
        self,
        basis: SplineBasis,
        fidelity: str = "HF",
        target_s: Array | None = None,
        backend: str = "mock",
        command: list[str] | None = None,
        timeout: float = 60.0,
    ):
        if backend not in ("mock", "external"):
            raise ValueError(f"unknown backend {backend!r}")
        self.basis = basis
        self.fidelity = fidelity.upper()
        self.target_s = None if target_s is None else as_vector(target_s, "target s")
        self.backend = backend
        self.command = list(command) if command else list(SERVER_COMMAND)
        self.timeout = timeout

    def cp_distribution(self, design: Array) -> CpDistribution:
        coords, _valid = realize_geometry(design, self.basis)
        if self.backend == "mock":
            s, cp = mock_pressure_from_coords(coords, self.fidelity)
            return CpDistribution(s, cp)
        request = encode_request(coords, self.fidelity)
        try:
            proc = subprocess.run(
                self.command,
                input=request + "\n",
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise EvaluationFailure("evaluator timed out") from exc
        if proc.returncode != 0:
            raise EvaluationFailure(f"evaluator exited {proc.returncode}")
        try:
            resp = json.loads(proc.stdout.strip().splitlines()[-1])
        except (json.JSONDecodeError, IndexError) as exc:
            raise EvaluationFailure("malformed evaluator response") from exc
        if "error" in resp:
            raise EvaluationFailure(resp["error"])
        return CpDistribution(np.asarray(resp["s"]), np.asarray(resp["cp"]))

    def evaluate(self, x: Array) -> Array:
        """Negated pressure re-interpolated onto the target locations.

        Pressure vectors are negated at ingestion so that the scalar summary
        of interest (minimum pressure) becomes a maximum, matching the shared
        reduction convention.
        """
        if self.target_s is None:
            raise ValueError("evaluator needs target locations for comparisons")
        dist = self.cp_distribution(x)
        return -interpolate_cp(dist, self.target_s)

    def peak(self, x: Array) -> float:
        """Negated minimum pressure of the design (surrogate label)."""
        dist = self.cp_distribution(x)
        return float(np.max(-dist.cp))
