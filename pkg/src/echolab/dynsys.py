"""Deterministic drive systems.

Lorenz integration with a classical fixed-step RK4 scheme, circle
rotations, pointwise observation functions, and the small bespoke
reservoir maps used as worked examples elsewhere in the library
(a scalar tanh map, a signed-power contraction with trigonometric
forcing, and two polar-coordinate maps).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatchError, IntegrationDivergedError

DIVERGENCE_THRESHOLD = 1e12

TWO_PI = 2.0 * np.pi


@dataclass
class TimeSeries:
    """Uniformly sampled d-dimensional real time series.

    Attributes:
        step: sampling interval in time units, strictly positive.
        samples: (n_samples, dim) float array, finite entries only.
        origin_index: time index of the first sample, so row k sits at
            time (origin_index + k) * step.
    """

    step: float
    samples: np.ndarray
    origin_index: int = 0

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if self.step <= 0:
            raise ValueError("step must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.samples.shape[0]

    def to_csv(self) -> str:
        """Serialize as `t,x0,...,x{d-1}` rows at full precision."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"x{i}" for i in range(self.dim)])
        for k, row in enumerate(self.samples):
            t = (self.origin_index + k) * self.step
            writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> "TimeSeries":
        rows = list(csv.reader(io.StringIO(text)))
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        times, samples = data[:, 0], data[:, 1:]
        if len(times) > 1:
            step = times[1] - times[0]
        else:
            step = 1.0
        origin = int(round(times[0] / step)) if step != 0 else 0
        return TimeSeries(step=step, samples=samples, origin_index=origin)


@dataclass
class LorenzParams:
    """Lorenz system parameters, defaulting to the classical values."""

    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    tau: float = 0.01
    initial: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 1.05]))

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=float)
        if self.tau <= 0:
            raise ValueError("tau must be positive")


# Wing equilibrium used by the fixed-point diagnostics.
WING_FIXED_POINT = np.array([6.0 * np.sqrt(2.0), 6.0 * np.sqrt(2.0), 27.0])


def lorenz_rhs(state: np.ndarray, params: LorenzParams) -> np.ndarray:
    x, y, z = state
    return np.array(
        [
            params.sigma * (y - x),
            x * (params.rho - z) - y,
            x * y - params.beta * z,
        ]
    )


def lorenz_jacobian(state: np.ndarray, params: LorenzParams) -> np.ndarray:
    """Jacobian of the Lorenz vector field at `state`."""
    x, y, z = state
    return np.array(
        [
            [-params.sigma, params.sigma, 0.0],
            [params.rho - z, -1.0, -x],
            [y, x, -params.beta],
        ]
    )


def rk4_step(f: Callable[[np.ndarray], np.ndarray], state: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of size h."""
    k1 = f(state)
    k2 = f(state + 0.5 * h * k1)
    k3 = f(state + 0.5 * h * k2)
    k4 = f(state + h * k3)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def lorenz_step(state: np.ndarray, params: LorenzParams) -> np.ndarray:
    """One RK4 step of the Lorenz flow over the sampling interval tau."""
    return rk4_step(lambda s: lorenz_rhs(s, params), state, params.tau)


def lorenz_step_jacobian(state: np.ndarray, params: LorenzParams) -> np.ndarray:
    """Derivative of the discrete RK4 step map at `state`.

    Propagates the variational equation through the same four stages as
    the state update, so the result is the exact Jacobian of
    `lorenz_step` rather than a finite-difference estimate.
    """
    h = params.tau
    eye = np.eye(3)
    k1 = lorenz_rhs(state, params)
    d1 = lorenz_jacobian(state, params)
    s2 = state + 0.5 * h * k1
    k2 = lorenz_rhs(s2, params)
    d2 = lorenz_jacobian(s2, params) @ (eye + 0.5 * h * d1)
    s3 = state + 0.5 * h * k2
    k3 = lorenz_rhs(s3, params)
    d3 = lorenz_jacobian(s3, params) @ (eye + 0.5 * h * d2)
    s4 = state + h * k3
    d4 = lorenz_jacobian(s4, params) @ (eye + h * d3)
    return eye + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4)


def integrate_lorenz(params: LorenzParams, n_steps: int) -> TimeSeries:
    """Integrate the Lorenz system for n_steps fixed RK4 steps of size tau.

    Returns n_steps + 1 samples whose first row equals the initial
    condition. Raises IntegrationDivergedError (naming the step) if the
    state leaves the finite range.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    out = np.empty((n_steps + 1, 3))
    out[0] = params.initial
    state = params.initial
    for k in range(n_steps):
        state = lorenz_step(state, params)
        if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > DIVERGENCE_THRESHOLD:
            raise IntegrationDivergedError(k + 1)
        out[k + 1] = state
    return TimeSeries(step=params.tau, samples=out)


def circle_rotation(epsilon: float, m0: float, n_steps: int) -> TimeSeries:
    """Rigid rotation m -> m + epsilon on the circle, angles reduced mod 2*pi."""
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    angles = np.mod(m0 + epsilon * np.arange(n_steps + 1), TWO_PI)
    return TimeSeries(step=1.0, samples=angles[:, None])


def circular_distance(a: float, b: float) -> float:
    """Shortest angular distance between two angles."""
    d = np.mod(a - b, TWO_PI)
    return float(np.minimum(d, TWO_PI - d))


@dataclass
class ObservationFn:
    """Pointwise observation applied to every sample of a series.

    kind: 'coord' selects component `index`; 'scaled_sin' maps a scalar
    sample m to amplitude * sin(m); 'custom' applies `fn` rowwise.
    """

    kind: str
    index: int = 0
    amplitude: float = 1.0
    fn: Optional[Callable[[np.ndarray], float]] = None

    def __call__(self, sample: np.ndarray) -> np.ndarray:
        if self.kind == "coord":
            return np.atleast_1d(sample[self.index])
        if self.kind == "scaled_sin":
            return np.atleast_1d(self.amplitude * np.sin(sample[0]))
        if self.kind == "custom":
            return np.atleast_1d(self.fn(sample))
        raise ValueError(f"unknown observation kind {self.kind!r}")


def observe(series: TimeSeries, fn: ObservationFn) -> TimeSeries:
    """Apply an observation function to every sample, preserving timing."""
    if fn.kind == "coord" and fn.index >= series.dim:
        raise DimensionMismatchError(
            f"coord index {fn.index} out of range for dim {series.dim}"
        )
    rows = [fn(s) for s in series.samples]
    return TimeSeries(
        step=series.step, samples=np.array(rows), origin_index=series.origin_index
    )


def _tanh2x_map(x: np.ndarray, z: float) -> np.ndarray:
    return np.tanh(2.0 * x + z)


def _signed_power_map(x: np.ndarray, z: float, alpha: float, lam: float, k: float) -> np.ndarray:
    base = np.sign(x) * np.abs(x) ** alpha
    forcing = lam * np.array([np.sin(k * z), np.cos(k * z), np.sin(k * z) ** 2])
    return base + forcing


def _polar_sqrt_map(x: np.ndarray, z: float, delta: float) -> np.ndarray:
    rho, theta = x
    return np.array([np.sqrt(rho) + z, theta + delta])


def _polar_square_map(x: np.ndarray, z: float, delta: float) -> np.ndarray:
    rho, theta = x
    return np.array([rho * rho + z, theta + delta])


EXAMPLE_DRIVE_DIMS = {
    "tanh2x": 1,
    "signed_power": 3,
    "polar_sqrt": 2,
    "polar_square": 2,
}


def example_drive_map(kind: str, **params) -> Callable[[np.ndarray, float], np.ndarray]:
    """Return the one-step reservoir map for a named example drive.

    Kinds: 'tanh2x' (scalar x -> tanh(2x + z)); 'signed_power'
    (componentwise sgn(x)|x|^alpha plus lam*(sin kz, cos kz, sin^2 kz));
    'polar_sqrt' ((rho, theta) -> (sqrt(rho) + z, theta + delta));
    'polar_square' ((rho, theta) -> (rho^2 + z, theta + delta)).
    """
    if kind == "tanh2x":
        return _tanh2x_map
    if kind == "signed_power":
        alpha = params.get("alpha", 0.9)
        lam = params.get("lam", 0.009)
        k = params.get("k", 0.1)
        return lambda x, z: _signed_power_map(x, z, alpha, lam, k)
    if kind == "polar_sqrt":
        delta = params.get("delta", 0.1)
        return lambda x, z: _polar_sqrt_map(x, z, delta)
    if kind == "polar_square":
        delta = params.get("delta", 0.1)
        return lambda x, z: _polar_square_map(x, z, delta)
    raise ValueError(f"unknown example drive kind {kind!r}")


def example_drive(kind: str, input_series: TimeSeries, x0: np.ndarray, **params) -> TimeSeries:
    """Iterate a named example reservoir map over a scalar input series.

    Returns the state sequence x_0, ..., x_n with n = len(input_series),
    where x_{k+1} = F(x_k, z_k). The polar maps treat the state as
    (radius, angle) and abort with IntegrationDivergedError if the
    radius leaves the finite range (expected for 'polar_square' started
    at radius > 2).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    expected = EXAMPLE_DRIVE_DIMS[kind] if kind in EXAMPLE_DRIVE_DIMS else None
    if expected is not None and x0.shape[0] != expected:
        raise DimensionMismatchError(
            f"{kind} expects a state of dim {expected}, got {x0.shape[0]}"
        )
    if input_series.dim != 1:
        raise DimensionMismatchError("example drives take scalar input")
    fmap = example_drive_map(kind, **params)
    states = np.empty((len(input_series) + 1, x0.shape[0]))
    states[0] = x0
    x = x0
    for k, z in enumerate(input_series.samples[:, 0]):
        x = fmap(x, float(z))
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_THRESHOLD:
            raise IntegrationDivergedError(k + 1)
        states[k + 1] = x
    return TimeSeries(
        step=input_series.step, samples=states, origin_index=input_series.origin_index
    )
