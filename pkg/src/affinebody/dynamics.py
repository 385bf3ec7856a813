"""Classical time evolution of the reduced variables.

The packed state vector layout matches the trajectory CSV columns:
[q (n), p (n), upper(M), upper(N)].  The right-hand side is

    dq/dt = dH/dp,  dp/dt = -dH/dq,
    dM/dt = [M, G_M] + [N, G_N],  dN/dt = [N, G_M] + [M, G_N],

with G_M = dH/dM, G_N = dH/dN the skew gradient matrices.  Conservation
of energy and the quadratic Casimir is monitored, never enforced.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
from scipy.linalg import expm

from .errors import (ConfigError, DegenerateInertia, DomainError,
                     ShapeMismatch, StepFailure)
from . import phase
from .kinematics import Configuration, align_two_polar, two_polar
from .phase import ReducedState

ORTHOGONALITY_TOL = 1e-9
STATIONARY_TOL = 1e-10
THRESHOLD_TOL = 1e-12


@dataclass(frozen=True)
class StepControl:
    method: str = "rk4"          # "rk4" fixed step or "rk45" adaptive
    step: float = 1e-3
    record_every: int = 1
    rtol: float = 1e-8
    atol: float = 1e-10
    min_step: float = 1e-12
    max_step: float = 0.1

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ConfigError(f"unknown integrator {self.method!r}")
        if self.step <= 0 or self.record_every < 1:
            raise ConfigError("step must be positive, record_every >= 1")


def pack_state(state):
    return np.concatenate([state.q, state.p, state.m_upper, state.n_upper])


def unpack_state(y, n):
    nu = n * (n - 1) // 2
    return ReducedState(y[:n], y[n:2 * n],
                        m_upper=y[2 * n:2 * n + nu],
                        n_upper=y[2 * n + nu:])


def _rhs_packed(model, potential, y, n):
    """Batched equations of motion on packed vectors (..., dim)."""
    nu = n * (n - 1) // 2
    q = y[..., :n]
    p = y[..., n:2 * n]
    iu = np.triu_indices(n, k=1)
    M = np.zeros(y.shape[:-1] + (n, n))
    N = np.zeros(y.shape[:-1] + (n, n))
    M[..., iu[0], iu[1]] = y[..., 2 * n:2 * n + nu]
    N[..., iu[0], iu[1]] = y[..., 2 * n + nu:]
    M = M - np.swapaxes(M, -1, -2)
    N = N - np.swapaxes(N, -1, -2)
    dHdq, dHdp, GM, GN = phase.gradients(model, potential, q, p, M, N)
    dM = M @ GM - GM @ M + N @ GN - GN @ N
    dN = N @ GM - GM @ N + M @ GN - GN @ M
    return np.concatenate([dHdp, -dHdq, dM[..., iu[0], iu[1]],
                           dN[..., iu[0], iu[1]]], axis=-1)


def eom_rhs(model, potential, state):
    """Time derivative of a reduced state, returned in state layout."""
    dy = _rhs_packed(model, potential, pack_state(state), state.n)
    return unpack_state(dy, state.n)


@dataclass
class Trajectory:
    n: int
    model: object
    potential: object
    times: np.ndarray
    samples: np.ndarray          # (len, dim) packed states
    energy: np.ndarray
    casimir: np.ndarray
    control: StepControl
    attitudes: list | None = None
    energy_tolerance: float = 1e-8

    def state(self, k):
        return unpack_state(self.samples[k], self.n)

    @property
    def states(self):
        return [self.state(k) for k in range(len(self.times))]

    @property
    def energy_drift(self):
        scale = max(abs(self.energy[0]), 1.0)
        return float(np.max(np.abs(self.energy - self.energy[0])) / scale)

    @property
    def casimir_drift(self):
        scale = max(abs(self.casimir[0]), 1.0)
        return float(np.max(np.abs(self.casimir - self.casimir[0])) / scale)

    @property
    def conforming(self):
        return self.energy_drift <= self.energy_tolerance


def _energies(model, potential, ys, n):
    nu = n * (n - 1) // 2
    q = ys[..., :n]
    p = ys[..., n:2 * n]
    iu = np.triu_indices(n, k=1)
    M = np.zeros(ys.shape[:-1] + (n, n))
    N = np.zeros(ys.shape[:-1] + (n, n))
    M[..., iu[0], iu[1]] = ys[..., 2 * n:2 * n + nu]
    N[..., iu[0], iu[1]] = ys[..., 2 * n + nu:]
    M = M - np.swapaxes(M, -1, -2)
    N = N - np.swapaxes(N, -1, -2)
    energy = phase.kinetic_energy(model, q, p, M, N) + potential.value(q)
    casimir = phase._casimir_arrays(q, p, M, N)
    return energy, casimir


def _rk4_step(fun, y, h):
    k1 = fun(y)
    k2 = fun(y + 0.5 * h * k1)
    k3 = fun(y + 0.5 * h * k2)
    k4 = fun(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince 5(4) embedded pair
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192,
                   -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


def _rk45_step(fun, y, h):
    ks = [fun(y)]
    for i in range(1, 7):
        yi = y + h * sum(a * k for a, k in zip(_DP_A[i], ks))
        ks.append(fun(yi))
    y5 = y + h * sum(b * k for b, k in zip(_DP_B5, ks))
    y4 = y + h * sum(b * k for b, k in zip(_DP_B4, ks))
    return y5, np.max(np.abs(y5 - y4))


def integrate(model, potential, state0, t_end, control=StepControl(),
              energy_tolerance=1e-8):
    """Integrate the reduced equations of motion up to t_end."""
    if t_end <= 0:
        raise ConfigError("t_end must be positive")
    if potential.kind == "box":
        raise DomainError("box potential walls are not integrable; "
                          "use a steep oscillator classically")
    n = state0.n
    fun = lambda y: _rhs_packed(model, potential, y, n)
    y = pack_state(state0)
    times = [0.0]
    samples = [y]
    if control.method == "rk4":
        nsteps = max(1, int(round(t_end / control.step)))
        h = t_end / nsteps
        for k in range(nsteps):
            y = _rk4_step(fun, y, h)
            if (k + 1) % control.record_every == 0 or k == nsteps - 1:
                times.append((k + 1) * h)
                samples.append(y)
    else:
        t = 0.0
        h = min(control.step, t_end)
        scale = max(1.0, float(np.max(np.abs(y))))
        while t < t_end - 1e-15 * t_end:
            h = min(h, t_end - t)
            ynew, err = _rk45_step(fun, y, h)
            tol = control.atol + control.rtol * scale
            if err <= tol:
                t += h
                y = ynew
                times.append(t)
                samples.append(y)
                scale = max(1.0, float(np.max(np.abs(y))))
                factor = 2.0 if err == 0.0 else min(
                    2.0, max(0.2, 0.9 * (tol / err) ** 0.2))
                h = min(control.max_step, h * factor)
            else:
                h *= max(0.2, 0.9 * (tol / err) ** 0.2)
            if h < control.min_step:
                raise StepFailure(
                    f"adaptive step underflowed below {control.min_step:g} "
                    f"at t = {t:g}")
    samples = np.array(samples)
    energy, casimir = _energies(model, potential, samples, n)
    return Trajectory(n=n, model=model, potential=potential,
                      times=np.array(times), samples=samples,
                      energy=energy, casimir=casimir, control=control,
                      energy_tolerance=energy_tolerance)


def integrate_batch(model, potential, y0, t_end, step, n, record_every=None):
    """Fixed-step RK4 over a batch of packed states; records only the
    endpoints unless record_every is given.  Returns (times, samples) with
    samples shaped (records, batch, dim)."""
    fun = lambda y: _rhs_packed(model, potential, y, n)
    nsteps = max(1, int(round(t_end / step)))
    h = t_end / nsteps
    y = np.asarray(y0, dtype=float)
    times = [0.0]
    samples = [y]
    for k in range(nsteps):
        y = _rk4_step(fun, y, h)
        if record_every is not None and ((k + 1) % record_every == 0
                                         or k == nsteps - 1):
            times.append((k + 1) * h)
            samples.append(y)
    if record_every is None:
        times.append(t_end)
        samples.append(y)
    return np.array(times), np.array(samples)


def _project_rotation(L):
    u, _, vt = np.linalg.svd(L)
    return u @ vt


def reconstruct_attitudes(model, trajectory, L0, R0):
    """Propagate the attitude pair along a trajectory.

    The co-moving angular velocities chi = L^T dL/dt = G_M - G_N and
    theta = R^T dR/dt = G_M + G_N drive dL/dt = L chi, dR/dt = R theta
    (checked against exact exponential geodesics, where rebuilding
    L exp(q) R^T recovers exp(Omega t) phi0).  The reduced state is
    re-integrated
    jointly so the rotational velocities are available at the interior
    Runge-Kutta stages; L, R are re-projected onto the rotation group
    after every step.
    """
    n = trajectory.n
    L0 = np.asarray(L0, dtype=float)
    R0 = np.asarray(R0, dtype=float)
    if L0.shape != (n, n) or R0.shape != (n, n):
        raise ShapeMismatch("attitude seeds must be n x n")
    model_ = trajectory.model
    potential = trajectory.potential
    iu = np.triu_indices(n, k=1)
    nu = n * (n - 1) // 2

    def split_gradients(y):
        q, p = y[:n], y[n:2 * n]
        M = np.zeros((n, n))
        N = np.zeros((n, n))
        M[iu] = y[2 * n:2 * n + nu]
        N[iu] = y[2 * n + nu:]
        M = M - M.T
        N = N - N.T
        _, _, GM, GN = phase.gradients(model_, potential, q, p, M, N)
        return GM - GN, GM + GN

    def joint_rhs(z):
        y = z[:-2 * n * n]
        dy = _rhs_packed(model_, potential, y, n)
        chi, theta = split_gradients(y)
        L = z[-2 * n * n:-n * n].reshape(n, n)
        R = z[-n * n:].reshape(n, n)
        return np.concatenate([dy, (L @ chi).ravel(), (R @ theta).ravel()])

    times = trajectory.times
    attitudes = [(L0.copy(), R0.copy())]
    z = np.concatenate([trajectory.samples[0], L0.ravel(), R0.ravel()])
    substeps = max(1, trajectory.control.record_every)
    for k in range(1, len(times)):
        h = (times[k] - times[k - 1]) / substeps
        for _ in range(substeps):
            z = _rk4_step(joint_rhs, z, h)
            L = _project_rotation(z[-2 * n * n:-n * n].reshape(n, n))
            R = _project_rotation(z[-n * n:].reshape(n, n))
            z[-2 * n * n:-n * n] = L.ravel()
            z[-n * n:] = R.ravel()
        attitudes.append((L, R))
        resid = max(np.max(np.abs(L.T @ L - np.eye(n))),
                    np.max(np.abs(R.T @ R - np.eye(n))))
        if resid > ORTHOGONALITY_TOL:
            raise StepFailure(f"orthogonality residual {resid:g} "
                              "exceeded during attitude propagation")
    return Trajectory(n=n, model=model_, potential=potential,
                      times=times, samples=trajectory.samples,
                      energy=trajectory.energy, casimir=trajectory.casimir,
                      control=trajectory.control, attitudes=attitudes,
                      energy_tolerance=trajectory.energy_tolerance)


def geodesic_exponential(phi0, Omega, t):
    """Geodesic of the doubly affinely-invariant model:
    phi(t) = exp(Omega t) phi0."""
    phi0 = np.asarray(phi0, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    if phi0.shape != Omega.shape:
        raise ShapeMismatch("phi0 and Omega must have matching shapes")
    return Configuration(phi=expm(Omega * t) @ phi0)


def reduced_state_from_velocity(phi, Omega, model, reference=None):
    """Reduced state (q, p, M, N) matching a configuration-velocity pair
    for the affinely-invariant model.

    The affine spin is Sigma = A Omega + B Tr(Omega) I; transported to the
    two-polar co-moving axes it yields the momenta and couplings.  Passing
    the previous decomposition as reference keeps the sign gauge of the
    two-polar factors continuous along a path.
    """
    if model.kind != "AffAff":
        raise ConfigError("velocity extraction implemented for AffAff")
    phi = np.asarray(phi, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    n = phi.shape[0]
    tp = two_polar(phi)
    if reference is not None:
        tp = align_two_polar(tp, reference)
    Sigma = model.A * Omega + model.B * np.trace(Omega) * np.eye(n)
    Sp = tp.L.T @ Sigma @ tp.L
    p = np.diag(Sp).copy()
    rho = Sp - Sp.T
    Q = np.exp(tp.q)
    tau = (Q[:, None] * Sp.T / Q[None, :]) - (Sp * Q[None, :]) / Q[:, None]
    M = -rho - tau
    N = rho - tau
    return ReducedState(tp.q, p, M=0.5 * (M - M.T), N=0.5 * (N - N.T)), tp


def stationary_check(X, model_kind=None):
    """Residual of the stationary-solution condition [X, X^T] = 0.

    Pass Omega-hat for affine-metric models and Omega for metric-affine
    ones; the test is the same normality condition either way.
    """
    X = np.asarray(X, dtype=float)
    comm = X @ X.T - X.T @ X
    residual = float(np.linalg.norm(comm))
    return residual < STATIONARY_TOL, residual


# ---------------------------------------------------------------------------
# planar (n = 2) analytics


@dataclass(frozen=True)
class PlanarClassification:
    verdict: str                 # Bounded | Unbounded | Threshold
    m: float
    n_coupling: float
    turning_points: tuple | None = None
    x_min: float | None = None
    energy: float | None = None
    period: float | None = None


def planar_effective_potential(m, n_coupling, A, x):
    """V_eff(x) = m^2/(16 A sh^2(x/2)) - n^2/(16 A ch^2(x/2))."""
    if A == 0.0:
        raise ConfigError("A must be nonzero")
    x = np.asarray(x, dtype=float)
    if m != 0.0 and np.any(np.abs(x) < DEG_X_TOL):
        raise DegenerateInertia("x = 0 with m != 0 is singular")
    sh2 = np.sinh(0.5 * x) ** 2
    ch2 = np.cosh(0.5 * x) ** 2
    with np.errstate(divide="ignore"):
        rep = np.where(sh2 > 0.0, m ** 2 / (16.0 * A * np.where(
            sh2 > 0.0, sh2, 1.0)), 0.0)
    val = rep - n_coupling ** 2 / (16.0 * A * ch2)
    return val if val.ndim else float(val)


DEG_X_TOL = 1e-12


def _bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def classify_planar(m, n_coupling, A=1.0, energy=None):
    """Boundedness verdict for the planar shape motion.

    |m| < |n| gives bounded vibrations, |m| > |n| pure repulsion; the
    threshold |m| = |n| (to 1e-12) separates them.  With an energy below
    the escape level the turning points are found by bisection.
    """
    am, an = abs(m), abs(n_coupling)
    if abs(am - an) <= THRESHOLD_TOL * max(am, an, 1.0):
        verdict = "Threshold"
    elif am < an:
        verdict = "Bounded"
    else:
        verdict = "Unbounded"
    turning = None
    period = None
    x_star = None
    if verdict == "Bounded":
        if m != 0.0:
            x_star = _minimize_scalar(
                lambda x: planar_effective_potential(m, n_coupling, A, x),
                1e-8, 50.0)
        else:
            x_star = 0.0
    if energy is not None and verdict == "Bounded":
        v = lambda x: planar_effective_potential(m, n_coupling, A, x) - energy
        if m != 0.0:
            # repulsive wall at 0+, minimum, rise to 0-: bracket both roots
            if v(x_star) < 0.0:
                inner = _bisect(v, 1e-10, x_star)
                hi = x_star
                while v(hi) < 0.0 and hi < 1e3:
                    hi *= 2.0
                if v(hi) >= 0.0:
                    outer = _bisect(v, x_star, hi)
                    turning = (inner, outer)
        else:
            if v(0.0) < 0.0:
                hi = 1.0
                while v(hi) < 0.0 and hi < 1e3:
                    hi *= 2.0
                if v(hi) >= 0.0:
                    x_t = _bisect(v, 0.0, hi)
                    turning = (-x_t, x_t)
        if turning is not None:
            period = _planar_period(m, n_coupling, A, energy, turning)
    return PlanarClassification(verdict=verdict, m=float(m),
                                n_coupling=float(n_coupling),
                                turning_points=turning, x_min=x_star,
                                energy=energy, period=period)


def _planar_period(m, n_coupling, A, energy, turning):
    """Oscillation period T = integral dx sqrt(A / (E - V_eff(x)))
    between the turning points."""
    x1, x2 = turning
    mid = 0.5 * (x1 + x2)
    half = 0.5 * (x2 - x1)

    # substitute x = mid + half sin(theta) to remove the endpoint
    # singularities of the integrand
    def integrand(theta):
        x = mid + half * np.sin(theta)
        gap = energy - planar_effective_potential(m, n_coupling, A, x)
        gap = max(gap, 1e-300)
        return half * np.cos(theta) * np.sqrt(A / gap)

    val, _ = scipy.integrate.quad(integrand, -0.5 * np.pi, 0.5 * np.pi,
                                  limit=200)
    return float(val)


def _minimize_scalar(f, lo, hi, iters=200):
    """Golden-section minimum of a unimodal function on [lo, hi]."""
    gr = 0.5 * (np.sqrt(5.0) - 1.0)
    a, b = lo, hi
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
        if b - a < 1e-12:
            break
    return 0.5 * (a + b)


def planar_state(m, n_coupling, x0, px, A=1.0, B=0.0):
    """Reduced AffAff state realizing the planar shape system
    H_x = p_x^2/A + V_eff(x) with x = q1 - q2."""
    model = phase.ModelSpec(kind="AffAff", A=A, B=B)
    q = np.array([0.5 * x0, -0.5 * x0])
    p = np.array([px, -px])
    M = np.array([[0.0, m], [-m, 0.0]])
    N = np.array([[0.0, n_coupling], [-n_coupling, 0.0]])
    return model, ReducedState(q, p, M=M, N=N)
