"""Poisson structure on the reduced phase space.

Observables are value/gradient pairs.  The bracket combines the canonical
(q, p) part with the Lie-Poisson part on (M, N), whose structure constants
close {M,M} and {N,N} on M and {M,N} on N.  In matrix form, with skew
gradient matrices F_M = dF/dM etc.,

    {F, G} = dF/dq . dG/dp - dF/dp . dG/dq
             - (1/2) Tr(F_M [M, G_M] + F_N [M, G_N]
                        + F_M [N, G_N] + F_N [N, G_M]).
"""

from dataclasses import dataclass

import numpy as np

from .errors import UnknownObservable
from . import phase
from .phase import ReducedState, skew_from_upper, upper_from_skew


@dataclass
class PhaseGradient:
    dq: np.ndarray
    dp: np.ndarray
    dM: np.ndarray  # skew, entry (a,b) = dF/dM_ab for a < b
    dN: np.ndarray

    @classmethod
    def zero(cls, n):
        return cls(np.zeros(n), np.zeros(n), np.zeros((n, n)),
                   np.zeros((n, n)))


class Observable:
    """Scalar function on the reduced phase space with an exact gradient."""

    name = "observable"

    def value(self, state):
        raise NotImplementedError

    def gradient(self, state):
        raise NotImplementedError


class FunctionObservable(Observable):
    def __init__(self, name, value_fn, grad_fn):
        self.name = name
        self._value = value_fn
        self._grad = grad_fn

    def value(self, state):
        return float(self._value(state))

    def gradient(self, state):
        return self._grad(state)


class LinearObservable(Observable):
    """c0 + cq.q + cp.p + sum_{a<b} (CM_ab M_ab + CN_ab N_ab)."""

    def __init__(self, n, c0=0.0, cq=None, cp=None, CM=None, CN=None,
                 name="linear"):
        self.n = n
        self.name = name
        self.c0 = float(c0)
        self.cq = np.zeros(n) if cq is None else np.asarray(cq, dtype=float)
        self.cp = np.zeros(n) if cp is None else np.asarray(cp, dtype=float)
        self.CM = np.zeros((n, n)) if CM is None else np.asarray(CM, float)
        self.CN = np.zeros((n, n)) if CN is None else np.asarray(CN, float)

    def value(self, state):
        iu = np.triu_indices(self.n, k=1)
        return (self.c0 + self.cq @ state.q + self.cp @ state.p
                + self.CM[iu] @ state.m_upper + self.CN[iu] @ state.n_upper)

    def gradient(self, state):
        return PhaseGradient(self.cq.copy(), self.cp.copy(),
                             self.CM.copy(), self.CN.copy())


class ProductObservable(Observable):
    def __init__(self, f, g):
        self.f = f
        self.g = g
        self.name = f"({f.name})*({g.name})"

    def value(self, state):
        return self.f.value(state) * self.g.value(state)

    def gradient(self, state):
        fv, gv = self.f.value(state), self.g.value(state)
        gf, gg = self.f.gradient(state), self.g.gradient(state)
        return PhaseGradient(gv * gf.dq + fv * gg.dq,
                             gv * gf.dp + fv * gg.dp,
                             gv * gf.dM + fv * gg.dM,
                             gv * gf.dN + fv * gg.dN)


def _unit_skew(n, a, b):
    E = np.zeros((n, n))
    E[a, b] = 1.0
    E[b, a] = -1.0
    return E


def coordinate_observable(tag, n, a=None, b=None):
    """Observable for a phase-space coordinate.

    tag in {'q', 'p'} takes index a; {'M', 'N', 'rho', 'tau'} take a < b.
    """
    if tag in ("q", "p"):
        if a is None or not 0 <= a < n:
            raise UnknownObservable(f"bad index for {tag}")
        vec = np.zeros(n)
        vec[a] = 1.0
        kw = {"cq": vec} if tag == "q" else {"cp": vec}
        return LinearObservable(n, name=f"{tag}_{a + 1}", **kw)
    if tag in ("M", "N", "rho", "tau"):
        if a is None or b is None or not 0 <= a < b < n:
            raise UnknownObservable(f"bad index pair for {tag}")
        E = _unit_skew(n, a, b)
        if tag == "M":
            return LinearObservable(n, CM=E, name=f"M_{a + 1}{b + 1}")
        if tag == "N":
            return LinearObservable(n, CN=E, name=f"N_{a + 1}{b + 1}")
        if tag == "rho":
            # rho = (N - M)/2
            return LinearObservable(n, CM=-0.5 * E, CN=0.5 * E,
                                    name=f"rho_{a + 1}{b + 1}")
        return LinearObservable(n, CM=-0.5 * E, CN=-0.5 * E,
                                name=f"tau_{a + 1}{b + 1}")
    raise UnknownObservable(f"unknown observable tag {tag!r}")


def hamiltonian_observable(model, potential):
    def value(state):
        return phase.hamiltonian(model, potential, state)

    def grad(state):
        dq, dp, GM, GN = phase.gradients(model, potential,
                                         state.q, state.p, state.M, state.N)
        return PhaseGradient(dq, dp, GM, GN)

    return FunctionObservable(f"H[{model.kind}]", value, grad)


def squared_norm_observable(tag, n):
    """||rho||^2 or ||tau||^2 = (1/2) sum of squared entries."""
    if tag not in ("rho", "tau"):
        raise UnknownObservable(f"no squared-norm observable for {tag!r}")

    def value(state):
        mat = state.rho if tag == "rho" else state.tau
        return 0.5 * float(np.sum(mat ** 2))

    def grad(state):
        mat = state.rho if tag == "rho" else state.tau
        # d rho_ab / dM_ab = -1/2, d rho_ab / dN_ab = +1/2 and the value
        # counts each independent component once: sum_{a<b} rho_ab^2
        if tag == "rho":
            return PhaseGradient(np.zeros(n), np.zeros(n), -mat, mat)
        return PhaseGradient(np.zeros(n), np.zeros(n), -mat, -mat)

    return FunctionObservable(f"|{tag}|^2", value, grad)


def poisson_bracket(F, G, state):
    """Evaluate {F, G} at a reduced state."""
    gF = F.gradient(state)
    gG = G.gradient(state)
    canonical = float(gF.dq @ gG.dp - gF.dp @ gG.dq)
    M, N = state.M, state.N
    lie = -0.5 * np.trace(
        gF.dM @ (M @ gG.dM - gG.dM @ M)
        + gF.dN @ (M @ gG.dN - gG.dN @ M)
        + gF.dM @ (N @ gG.dN - gG.dN @ N)
        + gF.dN @ (N @ gG.dM - gG.dM @ N))
    return canonical + float(lie)


def bracket_observable(F, G):
    """The bracket {F, G} of two linear observables as a linear observable.

    The result is affine in (M, N) with a constant canonical part, so it is
    fully determined by probing basis states.
    """
    if not isinstance(F, LinearObservable) or not isinstance(G, LinearObservable):
        raise UnknownObservable(
            "symbolic brackets are available for linear observables only")
    n = F.n
    nupper = n * (n - 1) // 2
    zero = ReducedState(np.zeros(n), np.zeros(n))
    c0 = poisson_bracket(F, G, zero)
    CM = np.zeros((n, n))
    CN = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    for k in range(nupper):
        unit = np.zeros(nupper)
        unit[k] = 1.0
        sm = ReducedState(np.zeros(n), np.zeros(n), m_upper=unit,
                          n_upper=np.zeros(nupper))
        CM[iu[0][k], iu[1][k]] = poisson_bracket(F, G, sm) - c0
        sn = ReducedState(np.zeros(n), np.zeros(n),
                          m_upper=np.zeros(nupper), n_upper=unit)
        CN[iu[0][k], iu[1][k]] = poisson_bracket(F, G, sn) - c0
    CM = CM - CM.T
    CN = CN - CN.T
    return LinearObservable(n, c0=c0, CM=CM, CN=CN,
                            name=f"{{{F.name},{G.name}}}")
