"""Quantized reduced problems.

After Peter-Weyl separation of the attitude dependence, each spectral
problem is a matrix-valued Schrodinger operator on a grid of deformation
invariants.  The pair couplings act on the reduced amplitude f (a
(2s+1) x (2j+1) matrix) through the left/right spin actions
->S f = S f and <-S f = f S; the M-type combination is (<-S^j - ->S^s)
over sh^2 and the N-type is (<-S^j + ->S^s) over ch^2.

The Haar-measure weight is absorbed by default through the substitution
Phi = sqrt(P) Psi, which trades the first-order drift term of the radial
operator for an amended potential U = (d^2 sqrt(P)) / sqrt(P); the raw
weighted form is kept for cross-validation.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (ConfigError, ConvergenceFailure, GridTooCoarse,
                     InvalidLabel, ShapeMismatch, SingularWeight)
from .phase import ModelSpec, PotentialSpec

COINCIDENCE_TOL = 1e-12
MIN_POINTS = 16
MAX_LABEL = 4
MAX_AXIS_POINTS_3D = 64
DENSE_LIMIT = 4100


# ---------------------------------------------------------------------------
# spin algebra


@dataclass(frozen=True)
class SpinBlock:
    """Angular momentum matrices for one irreducible label."""

    label: float
    hbar: float
    matrices: tuple  # (J1, J2, J3) for n=3; a single 1x1 entry for n=2

    @property
    def dim(self):
        return self.matrices[0].shape[0]

    def casimir(self):
        return sum(J @ J for J in self.matrices)


def _check_half_integer(s, name="s"):
    if not np.isfinite(s) or s < 0 or abs(2 * s - round(2 * s)) > 1e-12:
        raise InvalidLabel(f"{name} = {s} is not a nonnegative half-integer")
    return round(2 * s) / 2.0


def spin_matrices(s, hbar=1.0):
    """Ladder-operator construction in the basis m = s, s-1, ..., -s."""
    s = _check_half_integer(s)
    dim = int(round(2 * s)) + 1
    m = s - np.arange(dim)
    # J+ raises m: nonzero entries one above the diagonal
    raise_amp = hbar * np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    Jp = np.zeros((dim, dim), dtype=complex)
    Jp[np.arange(dim - 1), np.arange(1, dim)] = raise_amp
    Jm = Jp.conj().T
    Jx = 0.5 * (Jp + Jm)
    Jy = -0.5j * (Jp - Jm)
    Jz = hbar * np.diag(m).astype(complex)
    return SpinBlock(label=s, hbar=hbar, matrices=(Jx, Jy, Jz))


def planar_generator(label, hbar=1.0):
    """1x1 generator of SO(2) for Fourier label m."""
    return np.array([[hbar * float(label)]], dtype=complex)


_EPS3 = {(0, 1): (2, 1.0), (0, 2): (1, -1.0), (1, 2): (0, 1.0)}


def skew_generator(block, a, b):
    """S_ab = eps_abc J_c for n = 3 blocks."""
    if a == b:
        return np.zeros_like(block.matrices[0])
    sign = 1.0
    if a > b:
        a, b = b, a
        sign = -1.0
    c, s = _EPS3[(a, b)]
    return sign * s * block.matrices[c]


# ---------------------------------------------------------------------------
# measure weights


def haar_weight(q):
    """P(q) = prod over ordered pairs i != j of |sh(q_i - q_j)|."""
    q = np.asarray(q, dtype=float)
    n = q.shape[-1]
    diffs = q[..., :, None] - q[..., None, :]
    off = ~np.eye(n, dtype=bool)
    terms = np.where(off, np.abs(np.sinh(diffs)), 1.0)
    return np.prod(terms, axis=(-2, -1))


def lebesgue_weight(Q):
    """P(Q) = prod over ordered pairs a != b of |Q_a^2 - Q_b^2|."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[-1]
    diffs = Q[..., :, None] ** 2 - Q[..., None, :] ** 2
    off = ~np.eye(n, dtype=bool)
    terms = np.where(off, np.abs(diffs), 1.0)
    return np.prod(terms, axis=(-2, -1))


def trig_weight(q):
    """Trigonometric analogue of the Haar weight: |sin| over ordered pairs."""
    q = np.asarray(q, dtype=float)
    n = q.shape[-1]
    diffs = q[..., :, None] - q[..., None, :]
    off = ~np.eye(n, dtype=bool)
    terms = np.where(off, np.abs(np.sin(diffs)), 1.0)
    return np.prod(terms, axis=(-2, -1))


# ---------------------------------------------------------------------------
# spectral problems


@dataclass(frozen=True)
class SpectralProblem:
    n: int
    model: ModelSpec
    alpha_label: float = 0.0     # spatial label s
    beta_label: float = 0.0      # material label j
    coordinate: str = "dilatation"   # dilatation | shear | full
    q_min: float = -1.0
    q_max: float = 1.0
    points: int = 64
    boundary: str = "dirichlet"
    potential: PotentialSpec = field(default_factory=PotentialSpec.none)
    use_amended_transform: bool = True
    half_integer_labels: bool = False

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ConfigError("n must be 2 or 3")
        if self.coordinate not in ("dilatation", "shear", "full"):
            raise ConfigError(f"unknown coordinate {self.coordinate!r}")
        if self.boundary not in ("dirichlet", "periodic"):
            raise ConfigError(f"unknown boundary {self.boundary!r}")
        if self.q_max <= self.q_min:
            raise ConfigError("q_max must exceed q_min")
        if self.points < MIN_POINTS:
            raise GridTooCoarse(f"points = {self.points} < {MIN_POINTS}")
        s = _check_half_integer(self.alpha_label, "s")
        j = _check_half_integer(self.beta_label, "j")
        if abs((j - s) - round(j - s)) > 1e-12:
            raise InvalidLabel("j - s must be an integer")
        if not self.half_integer_labels:
            if abs(s - round(s)) > 1e-12 or abs(j - round(j)) > 1e-12:
                raise InvalidLabel(
                    "half-integer labels need half_integer_labels=True")
        if self.n == 3 and (s > MAX_LABEL or j > MAX_LABEL):
            raise ConfigError(f"angular labels limited to {MAX_LABEL}")
        kind = self.model.kind
        if kind == "TrigUn":
            if self.boundary != "periodic":
                raise ConfigError("TrigUn requires periodic boundary")
            if self.coordinate == "full":
                raise ConfigError("full angle grids are not supported")
        elif self.boundary != "dirichlet":
            raise ConfigError(f"{kind} requires Dirichlet boundary")
        if self.coordinate == "shear":
            if self.n != 2:
                raise ConfigError("shear coordinate exists for n = 2 only")
            if kind == "DAlembert":
                raise ConfigError(
                    "the d'Alembert kinetic energy does not separate in "
                    "the shear coordinate")
        if self.coordinate == "dilatation" and kind == "DAlembert":
            raise ConfigError(
                "the d'Alembert kinetic energy does not separate in the "
                "dilatational coordinate")
        if self.coordinate == "full":
            if kind == "DAlembert" and self.q_min <= 0.0:
                raise ConfigError("d'Alembert grids need Q_min > 0")
            if self.n == 3 and self.points > MAX_AXIS_POINTS_3D:
                raise ConfigError(
                    f"n = 3 grids limited to {MAX_AXIS_POINTS_3D}^3 nodes")

    @property
    def block_shape(self):
        if self.n == 2:
            return (1, 1)
        ds = int(round(2 * self.alpha_label)) + 1
        dj = int(round(2 * self.beta_label)) + 1
        return (ds, dj)

    def to_json(self):
        return {
            "n": self.n, "model": self.model.to_json(),
            "alpha_label": self.alpha_label, "beta_label": self.beta_label,
            "coordinate": self.coordinate, "q_min": self.q_min,
            "q_max": self.q_max, "points": self.points,
            "boundary": self.boundary, "potential": self.potential.to_json(),
            "use_amended_transform": self.use_amended_transform,
            "half_integer_labels": self.half_integer_labels,
        }


@dataclass
class ReducedOperator:
    """Assembled grid operator.

    With a weight vector the operator is self-adjoint under the weighted
    inner product; without one it is symmetric outright (amended variables
    or weight-free problems).  block_dim reports the angular multiplicity
    of every grid unknown of a dilatational problem.
    """

    matrix: object               # dense ndarray or scipy sparse, Hermitian
    weight: np.ndarray | None
    nodes: np.ndarray            # (npts,) or (npts, n) coordinate values
    block_shape: tuple
    block_dim: int
    problem: SpectralProblem
    meta: dict

    @property
    def dim(self):
        return self.matrix.shape[0]


def _kinetic_coefficients(model, n):
    """(cL, cQ) with momentum part cL sum p_a^2 + cQ (sum p_a)^2."""
    kind = model.kind
    if kind == "DAlembert":
        return 1.0 / (2.0 * model.I), 0.0
    if kind == "MetrMetr":
        return 1.0 / (2.0 * model.a), \
            1.0 / (2.0 * model.b) - 1.0 / (2.0 * n * model.a)
    al = model.alpha
    denom = al + n * model.B
    if denom == 0.0:
        raise ConfigError("alpha + nB must be nonzero")
    return 1.0 / (2.0 * al), -model.B / (2.0 * al * denom)


def _coupling_constants(model):
    """(coefficient, sign of the N-type term)."""
    kind = model.kind
    if kind == "DAlembert":
        return 1.0 / (8.0 * model.I), 1.0
    sign = 1.0 if kind == "TrigUn" else -1.0
    return 1.0 / (32.0 * model.alpha), sign


def angular_shift(model_kind, s, j, model):
    """Constant block shift added by the metric-restricted kinetic terms."""
    s = _check_half_integer(s, "s")
    j = _check_half_integer(j, "j")
    hb2 = model.hbar ** 2
    if model_kind in ("AffAff", "DAlembert", "TrigUn"):
        return 0.0
    if model_kind == "MetrAff":
        return hb2 * s * (s + 1) / (2.0 * model.mu)
    if model_kind == "AffMetr":
        return hb2 * j * (j + 1) / (2.0 * model.mu)
    if model_kind == "MetrMetr":
        return hb2 * s * (s + 1) / (2.0 * model.c) \
            + hb2 * j * (j + 1) / (2.0 * model.d)
    raise ConfigError(f"unknown model kind {model_kind!r}")


def _grid_nodes(q_min, q_max, points, boundary):
    if boundary == "dirichlet":
        h = (q_max - q_min) / (points + 1)
        return q_min + h * np.arange(1, points + 1), h
    h = (q_max - q_min) / points
    return q_min + h * np.arange(points), h


def _laplacian_1d(points, h, boundary):
    """-d^2/dx^2 as a symmetric 3-point stencil (dense)."""
    K = (np.diag(np.full(points, 2.0))
         - np.diag(np.ones(points - 1), 1)
         - np.diag(np.ones(points - 1), -1))
    if boundary == "periodic":
        K[0, -1] -= 1.0
        K[-1, 0] -= 1.0
    return K / h ** 2


def _flux_operator_1d(weight_at, nodes, h, boundary):
    """-(1/P) d/dx (P d/dx) with midpoint weights.

    Returned as a plain matrix T; diag(P) @ T is exactly symmetric.
    """
    pts = nodes.size
    w = weight_at(nodes)
    if np.any(w <= 0.0):
        raise SingularWeight("weight vanishes on a grid node")
    wp = weight_at(nodes + 0.5 * h)
    wm = weight_at(nodes - 0.5 * h)
    T = np.zeros((pts, pts))
    for i in range(pts):
        T[i, i] = (wp[i] + wm[i]) / (w[i] * h ** 2)
        if i + 1 < pts:
            T[i, i + 1] = -wp[i] / (w[i] * h ** 2)
        if i > 0:
            T[i, i - 1] = -wm[i] / (w[i] * h ** 2)
    if boundary == "periodic":
        T[0, -1] = -wm[0] / (w[0] * h ** 2)
        T[-1, 0] = -wp[-1] / (w[-1] * h ** 2)
    return T, w


def _build_dilatation(problem):
    model = problem.model
    cL, cQ = _kinetic_coefficients(model, problem.n)
    mass_inv = cL / problem.n + cQ          # coefficient of pbar^2
    nodes, h = _grid_nodes(problem.q_min, problem.q_max, problem.points,
                           problem.boundary)
    hb2 = model.hbar ** 2
    K = _laplacian_1d(problem.points, h, problem.boundary)
    pot = problem.potential
    if pot.kind == "box":
        half = 0.5 * pot.params[0]
        if problem.q_min < -half - 1e-12 or problem.q_max > half + 1e-12:
            raise ConfigError("box potential narrower than the grid; "
                              "set the grid to the box width")
        v = np.zeros_like(nodes)
    else:
        v = pot.dilatational_value(nodes)
    shift = angular_shift(model.kind, problem.alpha_label,
                          problem.beta_label, model)
    H = hb2 * mass_inv * K + np.diag(v + shift)
    ds, dj = problem.block_shape
    return ReducedOperator(
        matrix=H, weight=None, nodes=nodes, block_shape=(1, 1),
        block_dim=ds * dj, problem=problem,
        meta={"mass_coefficient": mass_inv, "step": h,
              "multiplicity": ds * dj})


def _shear_weight_functions(kind):
    if kind == "TrigUn":
        return (lambda x: np.sin(x) ** 2), -1.0, np.sin, np.cos
    return (lambda x: np.sinh(x) ** 2), 1.0, np.sinh, np.cosh


def _build_shear(problem):
    model = problem.model
    cL, cQ = _kinetic_coefficients(model, 2)
    hb2 = model.hbar ** 2
    nodes, h = _grid_nodes(problem.q_min, problem.q_max, problem.points,
                           problem.boundary)
    weight_fn, amended_u, sm_fn, cm_fn = _shear_weight_functions(model.kind)
    cpl, sign_n = _coupling_constants(model)
    hbar = model.hbar
    bm = hbar * (problem.beta_label - problem.alpha_label)
    bp = hbar * (problem.beta_label + problem.alpha_label)

    coincident = np.abs(sm_fn(nodes)) < COINCIDENCE_TOL
    if np.any(coincident) and bm != 0.0:
        raise SingularWeight(
            "grid node on a coincidence with a nonvanishing coupling")

    # pair couplings: ordered pairs (1,2) and (2,1) double the single term
    sm2 = sm_fn(0.5 * nodes) ** 2
    cm2 = cm_fn(0.5 * nodes) ** 2
    vm = np.where(coincident, 0.0,
                  2.0 * cpl * bm ** 2 / np.where(coincident, 1.0, sm2))
    vn = sign_n * 2.0 * cpl * bp ** 2 / cm2
    q_nodes = np.stack([0.5 * nodes, -0.5 * nodes], axis=-1)
    v = problem.potential.value(q_nodes)
    shift = angular_shift(model.kind, problem.alpha_label,
                          problem.beta_label, model)
    diag_part = vm + vn + v + shift

    if problem.use_amended_transform:
        K = _laplacian_1d(problem.points, h, problem.boundary)
        H = 2.0 * hb2 * cL * (K + amended_u * np.eye(problem.points)) \
            + np.diag(diag_part)
        weight = None
    else:
        T, w = _flux_operator_1d(weight_fn, nodes, h, problem.boundary)
        H = 2.0 * hb2 * cL * T + np.diag(diag_part)
        weight = w
    return ReducedOperator(
        matrix=H, weight=weight, nodes=nodes, block_shape=(1, 1),
        block_dim=1, problem=problem,
        meta={"radial_coefficient": 2.0 * hb2 * cL, "step": h})


def _amended_potential_nodes(kind, coords):
    """U = (sum_a d_a^2 sqrt(P)) / sqrt(P) evaluated per grid node."""
    npts, n = coords.shape
    U = np.zeros(npts)
    for a in range(n):
        w = np.zeros(npts)
        wprime = np.zeros(npts)
        for b in range(n):
            if b == a:
                continue
            if kind == "DAlembert":
                d = coords[:, a] ** 2 - coords[:, b] ** 2
                w += 2.0 * coords[:, a] / d
                wprime += -2.0 * (coords[:, a] ** 2 + coords[:, b] ** 2) \
                    / d ** 2
            else:
                d = coords[:, a] - coords[:, b]
                w += 1.0 / np.tanh(d)
                wprime += -1.0 / np.sinh(d) ** 2
        U += w ** 2 + wprime
    return U


def _block_couplings(problem):
    """Ordered-pair block operators (a, b) -> (Bm^2, Bp^2) as dense blocks."""
    ds, dj = problem.block_shape
    hbar = problem.model.hbar
    if problem.n == 2:
        s_gen = planar_generator(problem.alpha_label, hbar)
        j_gen = planar_generator(problem.beta_label, hbar)
        gens = {(0, 1): (s_gen, j_gen), (1, 0): (-s_gen, -j_gen)}
    else:
        sblk = spin_matrices(problem.alpha_label, hbar)
        jblk = spin_matrices(problem.beta_label, hbar)
        gens = {}
        for a in range(3):
            for b in range(3):
                if a != b:
                    gens[(a, b)] = (skew_generator(sblk, a, b),
                                    skew_generator(jblk, a, b))
    out = {}
    for (a, b), (Ss, Sj) in gens.items():
        left = np.kron(np.eye(ds), Sj.T)     # f S^j on row-major flattening
        right = np.kron(Ss, np.eye(dj))      # S^s f
        Bm = left - right
        Bp = left + right
        out[(a, b)] = (Bm @ Bm, Bp @ Bp)
    return out


def _build_full(problem):
    model = problem.model
    kind = model.kind
    n = problem.n
    cL, cQ = _kinetic_coefficients(model, n)
    hb2 = model.hbar ** 2
    axis_nodes, h = _grid_nodes(problem.q_min, problem.q_max,
                                problem.points, problem.boundary)
    pts = problem.points
    # stagger the axes so that no node (and no flux midpoint, offset by
    # h/2) lands on the coincidence set q_a = q_b where the weight and
    # couplings are singular
    stagger = h / (2 * n + 1)
    axes = [axis_nodes + a * stagger for a in range(n)]
    grids = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=-1)
    npts = coords.shape[0]
    ds, dj = problem.block_shape
    bdim = ds * dj

    if kind == "DAlembert":
        weight_nodes = lebesgue_weight(coords)
        dm = coords[:, :, None] - coords[:, None, :]
        dn = coords[:, :, None] + coords[:, None, :]
        v_nodes = problem.potential.value(np.log(coords))
    else:
        weight_nodes = haar_weight(coords)
        x = coords[:, :, None] - coords[:, None, :]
        dm = 2.0 * np.sinh(0.5 * x)   # squared below; factor absorbed
        dn = 2.0 * np.cosh(0.5 * x)
        v_nodes = problem.potential.value(coords)
    cpl, sign_n = _coupling_constants(model)

    blocks = _block_couplings(problem)
    coupling_nonzero = any(np.max(np.abs(B)) > 0.0
                           for B, _ in blocks.values())

    # sparse 1D pieces
    eye_ax = sp.identity(pts, format="csr")
    shift_c = angular_shift(kind, problem.alpha_label, problem.beta_label,
                            model)

    def axis_op(mat1d, axis):
        parts = [eye_ax] * n
        parts[axis] = sp.csr_matrix(mat1d)
        out = parts[0]
        for part in parts[1:]:
            out = sp.kron(out, part, format="csr")
        return out

    if problem.use_amended_transform:
        K1 = _laplacian_1d(pts, h, problem.boundary)
        kin = sum(axis_op(K1, a) for a in range(n))
        U = _amended_potential_nodes(kind, coords)
        node_op = hb2 * cL * kin + sp.diags(hb2 * cL * U)
        weight = None
    else:
        if np.any(weight_nodes <= 0.0):
            raise SingularWeight("weight vanishes on a grid node")
        # per-axis flux form with midpoint weights keeps diag(P) H symmetric
        node_op = sp.csr_matrix((npts, npts))
        for a in range(n):
            shifted = coords.copy()
            shifted[:, a] += 0.5 * h
            wp = lebesgue_weight(shifted) if kind == "DAlembert" \
                else haar_weight(shifted)
            shifted[:, a] -= h
            wm = lebesgue_weight(shifted) if kind == "DAlembert" \
                else haar_weight(shifted)
            stride = pts ** (n - 1 - a)
            rows, cols, vals = [], [], []
            idx = np.arange(npts)
            ia = (idx // stride) % pts
            diag = (wp + wm) / (weight_nodes * h ** 2)
            rows.append(idx)
            cols.append(idx)
            vals.append(diag)
            up = ia + 1 < pts
            rows.append(idx[up])
            cols.append(idx[up] + stride)
            vals.append(-wp[up] / (weight_nodes[up] * h ** 2))
            dn_mask = ia > 0
            rows.append(idx[dn_mask])
            cols.append(idx[dn_mask] - stride)
            vals.append(-wm[dn_mask] / (weight_nodes[dn_mask] * h ** 2))
            node_op = node_op + sp.csr_matrix(
                (np.concatenate(vals),
                 (np.concatenate(rows), np.concatenate(cols))),
                shape=(npts, npts))
        node_op = hb2 * cL * node_op
        weight = weight_nodes

    if cQ != 0.0:
        D1 = np.zeros((pts, pts))
        idx = np.arange(pts - 1)
        D1[idx, idx + 1] = 0.5 / h
        D1[idx + 1, idx] = -0.5 / h
        if problem.boundary == "periodic":
            D1[0, -1] = -0.5 / h
            D1[-1, 0] = 0.5 / h
        G = sum(axis_op(D1, a) for a in range(n))
        if problem.use_amended_transform or weight is None:
            node_op = node_op - hb2 * cQ * (G @ G)
        else:
            W = sp.diags(weight)
            Winv = sp.diags(1.0 / weight)
            node_op = node_op - hb2 * cQ * (Winv @ (G @ (W @ G)))

    complex_blocks = any(np.iscomplexobj(B) and np.max(np.abs(B.imag)) > 0
                         for pair in blocks.values() for B in pair)
    dtype = complex if complex_blocks else float
    eye_block = sp.identity(bdim, format="csr")
    H = sp.kron(node_op, eye_block, format="csr").astype(dtype)

    for (a, b), (Bm2, Bp2) in blocks.items():
        denom_m = dm[:, a, b] ** 2
        denom_n = dn[:, a, b] ** 2
        bad = np.abs(denom_m) < COINCIDENCE_TOL ** 2
        if np.any(bad) and np.max(np.abs(Bm2)) > 0.0:
            raise SingularWeight(
                "grid node on a coincidence with a nonvanishing coupling")
        inv_m = np.where(bad, 0.0, cpl / np.where(bad, 1.0, denom_m))
        inv_n = sign_n * cpl / denom_n
        if np.max(np.abs(Bm2)) > 0.0:
            H = H + sp.kron(sp.diags(inv_m),
                            sp.csr_matrix(np.real_if_close(Bm2)
                                          if not complex_blocks else Bm2),
                            format="csr")
        if np.max(np.abs(Bp2)) > 0.0:
            H = H + sp.kron(sp.diags(inv_n),
                            sp.csr_matrix(np.real_if_close(Bp2)
                                          if not complex_blocks else Bp2),
                            format="csr")
    H = H + sp.kron(sp.diags(v_nodes + shift_c), eye_block, format="csr")

    weight_out = None if weight is None else np.repeat(weight, bdim)
    return ReducedOperator(
        matrix=H, weight=weight_out, nodes=coords,
        block_shape=(ds, dj), block_dim=1, problem=problem,
        meta={"step": h, "axis_points": pts,
              "coupling_nonzero": coupling_nonzero})


def build_reduced_hamiltonian(problem):
    """Assemble the grid operator for one reduced spectral problem."""
    if problem.coordinate == "dilatation":
        return _build_dilatation(problem)
    if problem.coordinate == "shear":
        return _build_shear(problem)
    return _build_full(problem)


# ---------------------------------------------------------------------------
# eigensolution


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray     # (dim, k), columns normalized
    residuals: np.ndarray
    weight: np.ndarray | None = None

    def gram_residual(self):
        V = self.eigenvectors
        if self.weight is None:
            G = V.conj().T @ V
        else:
            G = V.conj().T @ (self.weight[:, None] * V)
        return float(np.max(np.abs(G - np.eye(G.shape[0]))))


def _canonical_order(vals, vecs, tol=1e-10):
    """Deterministic handling of degenerate clusters: fix each vector's
    overall phase, then sort cluster members lexicographically."""
    k = vals.size
    for i in range(k):
        v = vecs[:, i]
        lead = np.argmax(np.abs(v) > 1e-8) if np.any(np.abs(v) > 1e-8) else 0
        ph = v[lead]
        if abs(ph) > 0:
            vecs[:, i] = v * (abs(ph) / ph)
    order = np.arange(k)
    scale = max(np.max(np.abs(vals)), 1.0)
    i = 0
    while i < k:
        jj = i
        while jj + 1 < k and abs(vals[jj + 1] - vals[i]) < tol * scale:
            jj += 1
        if jj > i:
            keys = [tuple(np.round(np.real(vecs[:, order[t]]), 8))
                    for t in range(i, jj + 1)]
            sub = sorted(range(i, jj + 1), key=lambda t: keys[t - i])
            order[i:jj + 1] = order[sub]
        i = jj + 1
    return vals[order], vecs[:, order]


def eigensolve(operator, count):
    """Lowest eigenpairs of an assembled operator.

    Weighted operators are symmetrized by the similarity transform
    D^{1/2} H D^{-1/2} with D = diag(weight); eigenvectors are returned in
    the original variables, orthonormal under the weighted product.
    """
    if isinstance(operator, ReducedOperator):
        mat = operator.matrix
        weight = operator.weight
    else:
        mat = operator
        weight = None
    dim = mat.shape[0]
    if count < 1 or count > dim:
        raise ConfigError("count must lie in [1, dim]")

    if weight is not None:
        if np.any(weight <= 0.0):
            raise SingularWeight("weight must be positive for eigensolution")
        rw = np.sqrt(weight)
        if sp.issparse(mat):
            mat = sp.diags(rw) @ mat @ sp.diags(1.0 / rw)
        else:
            mat = rw[:, None] * mat / rw[None, :]

    dense = not sp.issparse(mat) or dim <= DENSE_LIMIT
    if dense:
        A = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
        A = 0.5 * (A + A.conj().T)
        try:
            vals, vecs = scipy.linalg.eigh(A,
                                           subset_by_index=(0, count - 1))
        except scipy.linalg.LinAlgError as exc:
            raise ConvergenceFailure(f"dense eigensolver failed: {exc}")
    else:
        try:
            vals, vecs = spla.eigsh(mat.tocsc(), k=count, which="SA")
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceFailure(f"sparse eigensolver failed: {exc}")
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]

    residual_mat = mat
    res = np.empty(count)
    scale = max(np.max(np.abs(vals)), 1e-30)
    for i in range(count):
        r = residual_mat @ vecs[:, i] - vals[i] * vecs[:, i]
        res[i] = np.linalg.norm(r) / scale

    vals = np.real(vals)
    vals, vecs = _canonical_order(vals, vecs)
    if weight is not None:
        vecs = vecs / np.sqrt(weight)[:, None]
        norms = np.sqrt(np.einsum("ik,i,ik->k", vecs.conj(), weight,
                                  vecs).real)
        vecs = vecs / norms[None, :]
    return Spectrum(eigenvalues=vals, eigenvectors=vecs, residuals=res,
                    weight=weight)


# ---------------------------------------------------------------------------
# inner products


def _weight_values(weight_kind, coords):
    if weight_kind == "none":
        return np.ones(coords.shape[:-1] if coords.ndim > 1 else
                       coords.shape)
    if coords.ndim == 1:
        # one shear coordinate x corresponds to q = (x/2, -x/2)
        if weight_kind == "haar":
            return np.sinh(coords) ** 2
        if weight_kind == "trig":
            return np.sin(coords) ** 2
        raise ConfigError(f"1-d grids do not support {weight_kind!r}")
    if weight_kind == "haar":
        return haar_weight(coords)
    if weight_kind == "trig":
        return trig_weight(coords)
    if weight_kind == "lebesgue":
        return lebesgue_weight(coords)
    raise ConfigError(f"unknown weight kind {weight_kind!r}")


def inner_product(f1, f2, weight_kind, grid):
    """<f1|f2> = (1/(N_s N_j)) integral Tr(f1^+ f2) P, by trapezoid rule.

    grid is either a 1-d array of nodes of a single coordinate, or a
    sequence of axis-node arrays for a tensor grid.  Amplitudes carry the
    grid axes first, optionally followed by the (2s+1, 2j+1) matrix axes.
    """
    f1 = np.asarray(f1)
    f2 = np.asarray(f2)
    if f1.shape != f2.shape:
        raise ShapeMismatch("amplitudes must share a shape")
    if isinstance(grid, np.ndarray) and grid.ndim == 1:
        axes = [np.asarray(grid, dtype=float)]
        coords = axes[0]
    else:
        axes = [np.asarray(ax, dtype=float) for ax in grid]
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack(mesh, axis=-1)
    grid_ndim = len(axes)
    grid_shape = tuple(ax.size for ax in axes)
    if f1.shape[:grid_ndim] != grid_shape:
        raise ShapeMismatch(
            f"amplitude grid axes {f1.shape[:grid_ndim]} do not match "
            f"the grid {grid_shape}")
    matrix_axes = f1.shape[grid_ndim:]
    if matrix_axes and len(matrix_axes) != 2:
        raise ShapeMismatch("matrix amplitudes need two trailing axes")
    weight = _weight_values(weight_kind, coords)
    if matrix_axes:
        integrand = np.einsum("...mk,...mk->...", f1.conj(), f2)
        norm = matrix_axes[0] * matrix_axes[1]
    else:
        integrand = f1.conj() * f2
        norm = 1
    integrand = integrand * weight
    trapz = getattr(np, "trapezoid", None) or np.trapz
    for ax in reversed(axes):
        integrand = trapz(integrand, x=ax, axis=grid_ndim - 1)
        grid_ndim -= 1
    return complex(integrand) / norm
