"""Reduced phase space of the internal motion.

After splitting off the attitude factors L, R, the classical state is
(q, p, M, N): log deformation invariants, their conjugate momenta, and
two skew-symmetric coupling matrices built from spin and vorticity in
co-moving axes (rho = (N - M)/2, tau = -(M + N)/2).  The dynamics of
these variables is closed; every supported kinetic model evaluates to a
Sutherland-type lattice Hamiltonian in them.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateInertia, DomainError

MODEL_KINDS = ("DAlembert", "AffAff", "AffMetr", "MetrAff", "MetrMetr", "TrigUn")

# alpha-family kinds share the hyperbolic lattice form
HYPERBOLIC_KINDS = ("AffAff", "AffMetr", "MetrAff", "MetrMetr")

# |q_a - q_b| below this with a nonzero M_ab coupling is a genuine
# singularity of the lattice terms; with M_ab = 0 the term is removable
DEGENERACY_TOL = 1e-9

POTENTIAL_KINDS = ("none", "harmonic_well", "box", "steep_oscillator")


# ---------------------------------------------------------------------------
# skew-matrix helpers


def upper_from_skew(M):
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    return M[np.triu_indices(n, k=1)].copy()


def skew_from_upper(upper, n):
    M = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    M[iu] = upper
    return M - M.T


def _check_skew(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"{name} must be a square matrix")
    if np.max(np.abs(M + M.T)) > 1e-12 * max(1.0, np.max(np.abs(M))):
        raise ConfigError(f"{name} must be skew-symmetric")
    return M


class ReducedState:
    """Closed classical state (q, p, M, N).

    M and N are stored as strictly-upper triangles so the skew symmetry
    M = -M^T, N = -N^T holds exactly on reconstruction.
    """

    __slots__ = ("q", "p", "m_upper", "n_upper")

    def __init__(self, q, p, M=None, N=None, m_upper=None, n_upper=None):
        self.q = np.asarray(q, dtype=float).copy()
        self.p = np.asarray(p, dtype=float).copy()
        n = self.q.size
        if self.p.size != n:
            raise ConfigError("q and p must have the same length")
        nupper = n * (n - 1) // 2
        if m_upper is not None:
            self.m_upper = np.asarray(m_upper, dtype=float).copy()
        else:
            self.m_upper = upper_from_skew(_check_skew(M, "M")) \
                if M is not None else np.zeros(nupper)
        if n_upper is not None:
            self.n_upper = np.asarray(n_upper, dtype=float).copy()
        else:
            self.n_upper = upper_from_skew(_check_skew(N, "N")) \
                if N is not None else np.zeros(nupper)
        if self.m_upper.size != nupper or self.n_upper.size != nupper:
            raise ConfigError("M/N sizes inconsistent with q")

    @property
    def n(self):
        return self.q.size

    @property
    def M(self):
        return skew_from_upper(self.m_upper, self.n)

    @property
    def N(self):
        return skew_from_upper(self.n_upper, self.n)

    @property
    def rho(self):
        """Spin in L-co-moving axes: rho = (N - M)/2."""
        return skew_from_upper(0.5 * (self.n_upper - self.m_upper), self.n)

    @property
    def tau(self):
        """Negative vorticity in R-co-moving axes: tau = -(M + N)/2."""
        return skew_from_upper(-0.5 * (self.m_upper + self.n_upper), self.n)

    def copy(self):
        return ReducedState(self.q, self.p,
                            m_upper=self.m_upper, n_upper=self.n_upper)

    def __repr__(self):
        return (f"ReducedState(q={self.q}, p={self.p}, "
                f"m_upper={self.m_upper}, n_upper={self.n_upper})")


# ---------------------------------------------------------------------------
# model and potential specifications


@dataclass(frozen=True)
class ModelSpec:
    """Kinetic model tag with inertial constants.

    Per-kind usage: DAlembert needs I > 0; AffAff and TrigUn use A, B;
    AffMetr/MetrAff use I, A, B through alpha = I + A and mu = (I^2 - A^2)/I;
    MetrMetr takes its four constants (a, b, c, d) directly.
    """

    kind: str
    m: float = 1.0
    I: float = 1.0
    A: float = 1.0
    B: float = 0.0
    I1: float | None = None
    I2: float | None = None
    a: float | None = None
    b: float | None = None
    c: float | None = None
    d: float | None = None
    hbar: float = 1.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        for name in ("m", "I", "A", "B", "hbar"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"constant {name} must be finite")
        if self.kind == "DAlembert" and self.I <= 0.0:
            raise ConfigError("DAlembert requires I > 0")
        if self.kind in ("AffAff", "TrigUn") and self.A == 0.0:
            raise ConfigError(f"{self.kind} requires A != 0")
        if self.kind in ("AffMetr", "MetrAff"):
            if self.I + self.A == 0.0:
                raise ConfigError("alpha = I + A must be nonzero")
            if self.I == 0.0 or self.I ** 2 == self.A ** 2:
                raise ConfigError("mu = (I^2 - A^2)/I must be finite and nonzero")
        if self.kind == "MetrMetr":
            for name in ("a", "b", "c", "d"):
                v = getattr(self, name)
                if v is None or not np.isfinite(v) or v == 0.0:
                    raise ConfigError(
                        f"MetrMetr requires finite nonzero constant {name}")

    @property
    def alpha(self):
        """Coefficient of the quadratic Casimir in the kinetic energy."""
        if self.kind in ("AffAff", "TrigUn"):
            return self.A
        if self.kind in ("AffMetr", "MetrAff"):
            return self.I + self.A
        if self.kind == "MetrMetr":
            return self.a
        raise ConfigError(f"alpha undefined for kind {self.kind}")

    @property
    def mu(self):
        if self.kind not in ("AffMetr", "MetrAff"):
            raise ConfigError(f"mu undefined for kind {self.kind}")
        return (self.I ** 2 - self.A ** 2) / self.I

    def beta(self, n):
        """beta = -alpha(alpha + nB)/B; requires B != 0."""
        if self.B == 0.0:
            raise ConfigError("beta undefined at B = 0")
        al = self.alpha
        return -al * (al + n * self.B) / self.B

    def trace_coefficient(self, n):
        """Denominator constant of the pbar^2 term: 2n(alpha + nB), or 2b."""
        if self.kind == "MetrMetr":
            return 2.0 * self.b
        al = self.alpha
        val = 2.0 * n * (al + n * self.B)
        if val == 0.0:
            raise ConfigError("alpha + nB must be nonzero")
        return val

    def to_json(self):
        out = {"kind": self.kind, "m": self.m, "I": self.I, "A": self.A,
               "B": self.B, "hbar": self.hbar}
        for name in ("I1", "I2", "a", "b", "c", "d"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        return out

    @classmethod
    def from_json(cls, block):
        if not isinstance(block, dict):
            raise ConfigError("model block must be a JSON object")
        allowed = {"kind", "m", "I", "A", "B", "I1", "I2",
                   "a", "b", "c", "d", "hbar"}
        unknown = set(block) - allowed
        if unknown:
            raise ConfigError(f"unknown model keys: {sorted(unknown)}")
        if "kind" not in block:
            raise ConfigError("model block requires a 'kind'")
        return cls(**block)


@dataclass(frozen=True)
class PotentialSpec:
    """Potential V(q) = dilatational part V(qbar) + pairwise couplings.

    Depends on q only, so the (q, p, M, N) dynamics stays closed.  The
    library tags cover the dilatational part; arbitrary pairwise couplings
    f(q_i - q_j) enter through a (f, dfdx) callable pair.
    """

    kind: str = "none"
    params: tuple = ()
    pairwise: tuple | None = None  # (f, dfdx), both ndarray-aware

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ConfigError(f"unknown potential kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(self.params))
        if self.kind == "harmonic_well" and len(self.params) != 1:
            raise ConfigError("harmonic_well takes one parameter k")
        if self.kind == "box" and (len(self.params) != 1
                                   or self.params[0] <= 0):
            raise ConfigError("box takes one positive width parameter")
        if self.kind == "steep_oscillator":
            if len(self.params) != 2:
                raise ConfigError("steep_oscillator takes (k, exponent)")
            exponent = self.params[1]
            if exponent != int(exponent) or int(exponent) < 2 \
                    or int(exponent) % 2:
                raise ConfigError("steep_oscillator exponent must be an "
                                  "even integer >= 2")

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def harmonic_well(cls, k):
        return cls(kind="harmonic_well", params=(k,))

    @classmethod
    def box(cls, width):
        return cls(kind="box", params=(width,))

    @classmethod
    def steep_oscillator(cls, k, exponent):
        return cls(kind="steep_oscillator", params=(k, exponent))

    @property
    def is_trivial(self):
        return self.kind == "none" and self.pairwise is None

    def dilatational_value(self, qbar):
        """V(qbar) for the library tag; qbar may be an array."""
        qbar = np.asarray(qbar, dtype=float)
        if self.kind == "none":
            return np.zeros_like(qbar)
        if self.kind == "harmonic_well":
            return 0.5 * self.params[0] * qbar ** 2
        if self.kind == "box":
            half = 0.5 * self.params[0]
            return np.where(np.abs(qbar) < half, 0.0, np.inf)
        k, exponent = self.params
        return k * qbar ** int(exponent)

    def dilatational_slope(self, qbar):
        qbar = np.asarray(qbar, dtype=float)
        if self.kind == "none":
            return np.zeros_like(qbar)
        if self.kind == "harmonic_well":
            return self.params[0] * qbar
        if self.kind == "box":
            raise DomainError("box potential has no smooth gradient")
        k, exponent = self.params
        return k * int(exponent) * qbar ** (int(exponent) - 1)

    def value(self, q):
        """Total potential on q, batched over leading dimensions."""
        q = np.asarray(q, dtype=float)
        qbar = q.mean(axis=-1)
        total = self.dilatational_value(qbar)
        if self.pairwise is not None:
            f = self.pairwise[0]
            diffs = q[..., :, None] - q[..., None, :]
            n = q.shape[-1]
            off = ~np.eye(n, dtype=bool)
            total = total + 0.5 * np.sum(f(diffs) * off, axis=(-2, -1))
        return total

    def grad(self, q):
        q = np.asarray(q, dtype=float)
        n = q.shape[-1]
        qbar = q.mean(axis=-1)
        g = np.broadcast_to(
            (self.dilatational_slope(qbar) / n)[..., None], q.shape).copy()
        if self.pairwise is not None:
            df = self.pairwise[1]
            diffs = q[..., :, None] - q[..., None, :]
            off = ~np.eye(n, dtype=bool)
            slopes = df(diffs) * off
            # d/dq_c of (1/2) sum_{i != j} f(q_i - q_j)
            g = g + 0.5 * (np.sum(slopes, axis=-1)
                           - np.sum(df(-diffs) * off, axis=-1))
        return g

    def to_json(self):
        out = {"kind": self.kind}
        if self.params:
            out["params"] = list(self.params)
        return out

    @classmethod
    def from_json(cls, block):
        if block is None:
            return cls.none()
        if not isinstance(block, dict):
            raise ConfigError("potential block must be a JSON object")
        unknown = set(block) - {"kind", "params"}
        if unknown:
            raise ConfigError(f"unknown potential keys: {sorted(unknown)}")
        return cls(kind=block.get("kind", "none"),
                   params=tuple(block.get("params", ())))


def wrap_angle(q):
    """Map angles into the (-pi, pi] convention."""
    q = np.asarray(q, dtype=float)
    wrapped = np.mod(-q + np.pi, 2.0 * np.pi)
    return np.pi - wrapped


# ---------------------------------------------------------------------------
# d'Alembert Legendre transformation


def legendre_dalembert(D, Qdot, chi_hat, theta_hat, inertia):
    """Momenta (P, rho, tau) from velocities (Qdot, chi, theta).

    P_a = I Qdot_a; rho = I(D^2 chi + chi D^2 - 2 D theta D);
    tau = I(D^2 theta + theta D^2 - 2 D chi D).
    """
    D = np.asarray(D, dtype=float)
    if D.ndim == 2:
        D = np.diag(D).copy()
    if inertia <= 0.0:
        raise ConfigError("inertia must be positive")
    if np.any(D <= 0.0):
        raise ConfigError("D must be positive diagonal")
    chi_hat = np.asarray(chi_hat, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    D2 = D ** 2
    P = inertia * np.asarray(Qdot, dtype=float)
    rho = inertia * (D2[:, None] * chi_hat + chi_hat * D2[None, :]
                     - 2.0 * D[:, None] * theta_hat * D[None, :])
    tau = inertia * (D2[:, None] * theta_hat + theta_hat * D2[None, :]
                     - 2.0 * D[:, None] * chi_hat * D[None, :])
    return P, rho, tau


def inverse_legendre_dalembert(D, P, rho_hat, tau_hat, inertia):
    """Velocities (Qdot, chi, theta) from momenta; exact pairwise inverse.

    Near-coincident Q_a = Q_b the pair system is rank deficient: it is
    solvable only when rho_ab = -tau_ab, in which case the symmetric
    gauge chi_ab + theta_ab = 0 is returned; otherwise DegenerateInertia.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim == 2:
        D = np.diag(D).copy()
    if inertia <= 0.0:
        raise ConfigError("inertia must be positive")
    if np.any(D <= 0.0):
        raise ConfigError("D must be positive diagonal")
    rho_hat = np.asarray(rho_hat, dtype=float)
    tau_hat = np.asarray(tau_hat, dtype=float)
    n = D.size
    Qdot = np.asarray(P, dtype=float) / inertia
    chi = np.zeros((n, n))
    theta = np.zeros((n, n))
    scale = max(np.max(np.abs(rho_hat)), np.max(np.abs(tau_hat)), 1.0)
    for a in range(n):
        for b in range(a + 1, n):
            s = inertia * (D[a] ** 2 + D[b] ** 2)
            t = -2.0 * inertia * D[a] * D[b]
            if abs(D[a] - D[b]) < DEGENERACY_TOL * max(D[a], D[b]):
                if abs(rho_hat[a, b] + tau_hat[a, b]) > 1e-9 * scale:
                    raise DegenerateInertia(
                        f"Q_{a + 1} = Q_{b + 1}: pair momenta inconsistent "
                        "with the degenerate inertia map")
                # removable limit, symmetric gauge chi + theta = 0
                chi[a, b] = rho_hat[a, b] / (s - t)
                theta[a, b] = -chi[a, b]
            else:
                det = s ** 2 - t ** 2
                chi[a, b] = (s * rho_hat[a, b] - t * tau_hat[a, b]) / det
                theta[a, b] = (s * tau_hat[a, b] - t * rho_hat[a, b]) / det
            chi[b, a] = -chi[a, b]
            theta[b, a] = -theta[a, b]
    return Qdot, chi, theta


# ---------------------------------------------------------------------------
# kinetic energies, Hamiltonians, Casimir

_OFF_CACHE = {}


def _offdiag(n):
    if n not in _OFF_CACHE:
        _OFF_CACHE[n] = ~np.eye(n, dtype=bool)
    return _OFF_CACHE[n]


def _pair_denominators(kind, q, M, N):
    """Per-pair inverse-square denominators with removable-singularity
    masking.  Returns (inv_m, inv_n, sign_n) where the M-coupling energy
    is sum M^2 * inv_m and the N-coupling energy is sign_n * sum N^2 * inv_n,
    each already including the removable-limit zeros.
    """
    n = q.shape[-1]
    off = _offdiag(n)
    x = q[..., :, None] - q[..., None, :]
    if kind == "DAlembert":
        Q = np.exp(q)
        dm = Q[..., :, None] - Q[..., None, :]
        dn = Q[..., :, None] + Q[..., None, :]
        singular = off & (np.abs(dm) < DEGENERACY_TOL
                          * np.maximum(Q[..., :, None], Q[..., None, :]))
        inv_n = 1.0 / dn ** 2
        sign_n = 1.0
    elif kind == "TrigUn":
        half = 0.5 * x
        sm = np.sin(half)
        cn = np.cos(half)
        singular = off & (np.abs(sm) < 0.5 * DEGENERACY_TOL)
        cos_singular = off & (np.abs(cn) < 0.5 * DEGENERACY_TOL)
        if np.any(cos_singular & (N != 0.0)):
            raise DegenerateInertia(
                "antipodal invariants q_a - q_b = pi with N coupling")
        cn_safe = np.where(cos_singular, 1.0, cn)
        inv_n = np.where(cos_singular, 0.0, 1.0 / cn_safe ** 2)
        dm = sm
        sign_n = 1.0
    else:
        half = 0.5 * x
        dm = np.sinh(half)
        dn = np.cosh(half)
        singular = off & (np.abs(x) < DEGENERACY_TOL)
        inv_n = 1.0 / dn ** 2
        sign_n = -1.0
    if np.any(singular & (M != 0.0)):
        raise DegenerateInertia(
            "coincident deformation invariants with nonzero M coupling")
    bad = singular | ~off
    dm_safe = np.where(bad, 1.0, dm)
    inv_m = np.where(bad, 0.0, 1.0 / dm_safe ** 2)
    inv_n = np.where(off, inv_n, 0.0)
    return inv_m, inv_n, sign_n


def _check_trig_domain(q):
    if np.any(q <= -np.pi) or np.any(q > np.pi):
        raise DomainError("TrigUn invariants must lie in (-pi, pi]")


def kinetic_energy(model, q, p, M, N):
    """Kinetic term of the Hamiltonian; batched over leading dimensions."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    n = q.shape[-1]
    kind = model.kind
    if kind == "TrigUn":
        _check_trig_domain(q)
    if kind == "DAlembert":
        inv_m, inv_n, _ = _pair_denominators(kind, q, M, N)
        translational = 0.5 * np.sum(p ** 2 * np.exp(-2.0 * q), axis=-1) \
            / model.I
        coupling = np.sum(M ** 2 * inv_m + N ** 2 * inv_n, axis=(-2, -1)) \
            / (8.0 * model.I)
        return translational + coupling
    alpha = model.alpha
    ptot = p.sum(axis=-1)
    quad = 0.5 * (np.sum(p ** 2, axis=-1) - ptot ** 2 / n) / alpha
    trace_part = ptot ** 2 / model.trace_coefficient(n)
    inv_m, inv_n, sign_n = _pair_denominators(kind, q, M, N)
    coupling = np.sum(M ** 2 * inv_m + sign_n * N ** 2 * inv_n,
                      axis=(-2, -1)) / (32.0 * alpha)
    total = quad + trace_part + coupling
    if kind == "AffMetr":
        tau = -0.5 * (M + N)
        total = total + 0.5 * np.sum(tau ** 2, axis=(-2, -1)) / (2.0 * model.mu)
    elif kind == "MetrAff":
        rho = 0.5 * (N - M)
        total = total + 0.5 * np.sum(rho ** 2, axis=(-2, -1)) / (2.0 * model.mu)
    elif kind == "MetrMetr":
        rho = 0.5 * (N - M)
        tau = -0.5 * (M + N)
        total = total + 0.5 * np.sum(rho ** 2, axis=(-2, -1)) / (2.0 * model.c)
        total = total + 0.5 * np.sum(tau ** 2, axis=(-2, -1)) / (2.0 * model.d)
    return total


def hamiltonian(model, potential, state):
    """Total energy H = T + V at a reduced state."""
    value = kinetic_energy(model, state.q, state.p, state.M, state.N) \
        + potential.value(state.q)
    return float(value)


def hamiltonian_affaff_lattice(model, potential, state):
    """Second, independent coding of the AffAff energy: the explicit
    lattice form with the 1/(2A) momentum sum and the -B/(2A(A+nB))
    trace correction, instead of the Casimir split."""
    if model.kind != "AffAff":
        raise ConfigError("lattice coding applies to AffAff only")
    q, p, M, N = state.q, state.p, state.M, state.N
    n = q.size
    A, B = model.A, model.B
    ptot = p.sum()
    inv_m, inv_n, _ = _pair_denominators("AffAff", q, M, N)
    value = 0.5 * np.sum(p ** 2) / A \
        - B * ptot ** 2 / (2.0 * A * (A + n * B)) \
        + np.sum(M ** 2 * inv_m - N ** 2 * inv_n) / (32.0 * A)
    return float(value + potential.value(q))


def casimir_csl2(state, n=None):
    """Quadratic Casimir of the special linear group in reduced variables;
    neither the mean momentum nor qbar enters."""
    q, p, M, N = state.q, state.p, state.M, state.N
    if n is None:
        n = q.size
    return float(_casimir_arrays(q, p, M, N))


def _casimir_arrays(q, p, M, N):
    n = q.shape[-1]
    inv_m, inv_n, _ = _pair_denominators("AffAff", q, M, N)
    pdiff = p[..., :, None] - p[..., None, :]
    return (0.5 / n) * np.sum(pdiff ** 2, axis=(-2, -1)) \
        + np.sum(M ** 2 * inv_m - N ** 2 * inv_n, axis=(-2, -1)) / 16.0


def gradients(model, potential, q, p, M, N):
    """Closed-form gradients (dH/dq, dH/dp, dH/dM, dH/dN).

    dH/dM and dH/dN are skew matrices whose (a, b) entries, a < b, are the
    partials with respect to the independent upper components.  Batched
    over leading dimensions.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    n = q.shape[-1]
    kind = model.kind
    if kind == "TrigUn":
        _check_trig_domain(q)
    x = q[..., :, None] - q[..., None, :]
    off = _offdiag(n)

    if kind == "DAlembert":
        I = model.I
        inv_m, inv_n, _ = _pair_denominators(kind, q, M, N)
        GM = M * inv_m / (2.0 * I)
        GN = N * inv_n / (2.0 * I)
        dHdp = p * np.exp(-2.0 * q) / I
        Q = np.exp(q)
        dm = Q[..., :, None] - Q[..., None, :]
        dn = Q[..., :, None] + Q[..., None, :]
        bad = ~off | (inv_m == 0.0)
        cube_m = np.where(bad, 0.0, 1.0 / np.where(bad, 1.0, dm) ** 3)
        cube_n = np.where(off, 1.0 / dn ** 3, 0.0)
        pair_q = -0.5 * Q * np.sum(
            M ** 2 * cube_m + N ** 2 * cube_n, axis=-1) / I
        dHdq = -p ** 2 * np.exp(-2.0 * q) / I + pair_q \
            + potential.grad(q)
        return dHdq, dHdp, GM, GN

    alpha = model.alpha
    inv_m, inv_n, sign_n = _pair_denominators(kind, q, M, N)
    GM = M * inv_m / (8.0 * alpha)
    GN = sign_n * N * inv_n / (8.0 * alpha)

    half = 0.5 * x
    if kind == "TrigUn":
        sm, cm = np.sin(half), np.cos(half)
    else:
        sm, cm = np.sinh(half), np.cosh(half)
    # d/dq_c of 1/sm^2(x/2) = -cm/sm^3 and of 1/cm^2(x/2) = -/+ sm/cm^3
    # (hyperbolic/trigonometric); removable-singularity masks reuse inv_m/inv_n
    grad_m = -cm * sm * inv_m ** 2
    grad_n = sm * cm * inv_n ** 2
    pair_q = np.sum(M ** 2 * grad_m + N ** 2 * grad_n, axis=-1) \
        / (16.0 * alpha)

    ptot = p.sum(axis=-1, keepdims=True)
    dHdp = (p - ptot / n) / alpha + 2.0 * ptot / model.trace_coefficient(n)
    dHdq = pair_q + potential.grad(q)

    if kind == "AffMetr":
        cv = 1.0 / (2.0 * model.mu)
        GM = GM + cv * 0.5 * (M + N)
        GN = GN + cv * 0.5 * (M + N)
    elif kind == "MetrAff":
        cv = 1.0 / (2.0 * model.mu)
        GM = GM + cv * 0.5 * (M - N)
        GN = GN + cv * 0.5 * (N - M)
    elif kind == "MetrMetr":
        GM = GM + 0.25 * (M - N) / model.c + 0.25 * (M + N) / model.d
        GN = GN + 0.25 * (N - M) / model.c + 0.25 * (M + N) / model.d
    return dHdq, dHdp, GM, GN
