"""Dynamical verification of trained autonomous reservoirs.

Newton search for fixed points of the readout-fed map, analytic ESN
Jacobians, eigenvalues of the discretised drive linearisation, the
discrete-QR Lyapunov spectrum, and PCA projection of state clouds.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .dynsys import TimeSeries, WING_FIXED_POINT, LorenzParams, lorenz_jacobian
from .errors import (
    DegenerateJacobianError,
    NearNeutralFixedPointError,
    NewtonConvergenceError,
)
from .reservoir import ReservoirSpec, make_rng


@dataclass
class FixedPointResult:
    x_star: np.ndarray
    residual: float
    iterations: int
    jacobian_eigs: np.ndarray
    residual_history: np.ndarray

    def to_json(self) -> str:
        return json.dumps(
            {
                "x_star": self.x_star.tolist(),
                "residual": self.residual,
                "iterations": self.iterations,
                "jacobian_eigs_real": self.jacobian_eigs.real.tolist(),
                "jacobian_eigs_imag": self.jacobian_eigs.imag.tolist(),
            }
        )


def _newton_once(psi, jac, x0, tol, max_iter):
    x = np.asarray(x0, dtype=float).copy()
    history = []
    eye = np.eye(x.shape[0])
    for it in range(1, max_iter + 1):
        fx = psi(x)
        residual = float(np.linalg.norm(fx - x))
        history.append(residual)
        if residual < tol:
            return x, residual, it - 1, history
        J = jac(x)
        lhs = J - eye
        if abs(np.linalg.det(lhs)) < 1e-300:
            raise NearNeutralFixedPointError("J - I is singular at the iterate")
        delta = np.linalg.solve(lhs, -(fx - x))
        x = x + delta
    fx = psi(x)
    residual = float(np.linalg.norm(fx - x))
    history.append(residual)
    if residual < tol:
        return x, residual, max_iter, history
    raise NewtonConvergenceError(residual, max_iter)


def newton_fixed_point(
    psi: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 100,
    n_retries: int = 3,
    retry_magnitude: float = 0.01,
    seed: int = 0,
) -> FixedPointResult:
    """Newton iteration x <- x - (J - I)^{-1} (psi(x) - x).

    Solves the linear system rather than forming the inverse. On
    failure, retries from a few slightly perturbed starts before
    raising; the returned result carries the eigenvalues of the
    Jacobian at the fixed point and the residual history.
    """
    rng = make_rng(seed)
    x0 = np.asarray(x0, dtype=float)
    last_error: Optional[Exception] = None
    for attempt in range(n_retries + 1):
        start = x0 if attempt == 0 else x0 + retry_magnitude * rng.standard_normal(x0.shape)
        try:
            x, residual, iters, history = _newton_once(psi, jac, start, tol, max_iter)
            eigs = np.linalg.eigvals(jac(x))
            return FixedPointResult(
                x_star=x,
                residual=residual,
                iterations=iters,
                jacobian_eigs=eigs,
                residual_history=np.array(history),
            )
        except (NewtonConvergenceError, NearNeutralFixedPointError) as exc:
            last_error = exc
    raise last_error


def esn_jacobian(spec: ReservoirSpec, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Jacobian of the autonomous map psi(x) = sigma(Ax + C W^T x + b).

    For tanh this is diag(1 - tanh^2(pre)) (A + C W^T); the identity
    activation drops the diagonal factor.
    """
    w = np.asarray(w, dtype=float).reshape(spec.n, spec.d)
    x = np.asarray(x, dtype=float).reshape(spec.n)
    linear = spec.A + spec.C @ w.T
    if spec.activation == "identity":
        return linear
    pre = spec.A @ x + spec.C @ (w.T @ x) + spec.b
    return (1.0 - np.tanh(pre) ** 2)[:, None] * linear


def matrix_exponential(Q: np.ndarray, series_tol: float = 1e-12) -> np.ndarray:
    """exp(Q) by scaling and squaring with a truncated power series."""
    Q = np.asarray(Q, dtype=float)
    norm = np.linalg.norm(Q, np.inf)
    s = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    B = Q / (2**s)
    term = np.eye(Q.shape[0])
    out = np.eye(Q.shape[0])
    k = 0
    while np.linalg.norm(term, np.inf) > series_tol:
        k += 1
        term = term @ B / k
        out = out + term
        if k > 200:
            break
    for _ in range(s):
        out = out @ out
    return out


def lorenz_wing_jacobian() -> np.ndarray:
    """Continuous-time Lorenz Jacobian at the wing equilibrium."""
    return lorenz_jacobian(WING_FIXED_POINT, LorenzParams())


def lorenz_linearization_eigs(
    m_star: Optional[np.ndarray] = None,
    tau: float = 0.01,
    jacobian: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Eigenvalues of exp(J tau) at a Lorenz fixed point.

    Defaults to the wing equilibrium; a user-supplied continuous-time
    Jacobian overrides the analytic one.
    """
    if jacobian is None:
        point = WING_FIXED_POINT if m_star is None else np.asarray(m_star, dtype=float)
        jacobian = lorenz_jacobian(point, LorenzParams())
    return np.linalg.eigvals(matrix_exponential(np.asarray(jacobian) * tau))


@dataclass
class LyapunovResult:
    exponents: np.ndarray
    n_iterations: int
    running_means: np.ndarray  # rows (iteration, lambda_1, ..., lambda_k)

    def to_json(self) -> str:
        return json.dumps(
            {"exponents": self.exponents.tolist(), "n_iterations": self.n_iterations}
        )

    def trace_csv(self) -> str:
        k = self.exponents.shape[0]
        lines = ["iter," + ",".join(f"lambda_{i+1}" for i in range(k))]
        for row in self.running_means:
            lines.append(
                f"{int(row[0])}," + ",".join(f"{v:.17g}" for v in row[1:])
            )
        return "\n".join(lines) + "\n"


def lyapunov_qr(
    step: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    n_iter: int,
    tau: float = 1.0,
    record_every: int = 100,
) -> LyapunovResult:
    """Discrete-QR Lyapunov spectrum of a map along its own orbit.

    Propagates an orthonormal frame through the Jacobian, re-factoring
    with QR at every step; R diagonals are sign-normalised positive
    before the log. The accumulated means are divided by tau to give
    per-unit-time exponents, with running means recorded periodically.
    """
    if n_iter < 100:
        raise ValueError("n_iter must be >= 100")
    x = np.asarray(x0, dtype=float).copy()
    n = x.shape[0]
    Q = np.eye(n)
    sums = np.zeros(n)
    traces = []
    for j in range(1, n_iter + 1):
        Z = jacobian(x) @ Q
        Q, R = np.linalg.qr(Z)
        diag = np.diag(R).copy()
        if np.any(diag == 0.0) or not np.all(np.isfinite(diag)):
            raise DegenerateJacobianError(f"zero R diagonal at iteration {j}")
        signs = np.sign(diag)
        Q = Q * signs[None, :]
        sums += np.log(np.abs(diag))
        if j % record_every == 0:
            traces.append(np.concatenate([[j], np.sort(sums / j / tau)[::-1]]))
        x = step(x)
    exponents = np.sort(sums / n_iter / tau)[::-1]
    return LyapunovResult(
        exponents=exponents,
        n_iterations=n_iter,
        running_means=np.array(traces) if traces else np.zeros((0, n + 1)),
    )


@dataclass
class PcaResult:
    projected: TimeSeries
    components: np.ndarray  # (n, k) orthonormal columns
    explained_variance: np.ndarray
    mean: np.ndarray


def pca_project(states: TimeSeries, k: int) -> PcaResult:
    """Project centered states onto their top-k principal directions.

    Components are the leading right singular vectors of the centered
    state matrix. Asking for more components than the data's rank emits
    a warning and zero-pads the basis.
    """
    X = states.samples
    if k > X.shape[1]:
        raise ValueError("k must not exceed the state dimension")
    if k > X.shape[0]:
        raise ValueError("need at least k samples")
    mean = X.mean(axis=0)
    centered = X - mean
    U, sv, Vt = np.linalg.svd(centered, full_matrices=False)
    tol = max(X.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    comps = Vt[:k].T.copy()
    if rank < k:
        warnings.warn(
            f"requested {k} components but data rank is {rank}; zero-padding",
            RuntimeWarning,
        )
        comps[:, rank:] = 0.0
    projected = centered @ comps
    var = (sv[:k] ** 2) / max(X.shape[0] - 1, 1)
    return PcaResult(
        projected=TimeSeries(
            step=states.step, samples=projected, origin_index=states.origin_index
        ),
        components=comps,
        explained_variance=var,
        mean=mean,
    )
