"""Config-driven experiment runner.

One JSON config describes one run; flags only select the config, output
directory, seed, and verbosity.  Every command prints a one-line summary
and writes machine-readable artifacts to the output directory.
"""

import argparse
import os
import sys

import numpy as np

from . import dynamics, io, kinematics, phase, poisson, quantum
from .errors import AffineBodyError, ConfigError

BRACKET_TOL = 1e-9
DECOMP_RECON_TOL = 1e-10
DECOMP_ORTHO_TOL = 1e-12
DECOMP_SV_TOL = 1e-9

COMMANDS = ("simulate", "geodesic", "classify", "spectrum",
            "check-brackets", "check-decomp")


def _check_keys(block, required, optional, where):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a JSON object")
    missing = [k for k in required if k not in block]
    if missing:
        raise ConfigError(f"{where} missing keys: {missing}")
    unknown = [k for k in block if k not in required and k not in optional]
    if unknown:
        raise ConfigError(f"{where} has unknown keys: {unknown}")
    return block


def _state_from_json(block):
    _check_keys(block, ("q", "p"), ("M", "N"), "initial")
    q = np.asarray(block["q"], dtype=float)
    p = np.asarray(block["p"], dtype=float)
    n = q.size
    M = np.asarray(block.get("M", np.zeros((n, n))), dtype=float)
    N = np.asarray(block.get("N", np.zeros((n, n))), dtype=float)
    return phase.ReducedState(q, p, M=M, N=N)


def _potential_from_json(block):
    if block is None:
        return phase.PotentialSpec.none()
    return phase.PotentialSpec.from_json(block)


def _control_from_json(block):
    allowed = ("step", "t_end", "method", "record_every", "tolerance",
               "rtol", "atol", "samples")
    _check_keys(block, ("t_end",), allowed, "numerics")
    kwargs = {}
    if "step" in block:
        kwargs["step"] = float(block["step"])
    if "method" in block:
        kwargs["method"] = block["method"]
    if "record_every" in block:
        kwargs["record_every"] = int(block["record_every"])
    if "rtol" in block:
        kwargs["rtol"] = float(block["rtol"])
    if "atol" in block:
        kwargs["atol"] = float(block["atol"])
    return dynamics.StepControl(**kwargs), float(block["t_end"])


# ---------------------------------------------------------------------------
# commands


def _cmd_simulate(config, output_dir, rng, quiet):
    _check_keys(config, ("model", "initial", "numerics"),
                ("command", "potential", "output", "seed"), "config")
    model = phase.ModelSpec.from_json(config["model"])
    potential = _potential_from_json(config.get("potential"))
    state0 = _state_from_json(config["initial"])
    control, t_end = _control_from_json(config["numerics"])
    out_block = config.get("output") or {}
    _check_keys(out_block, (), ("path", "format"), "output")
    path = os.path.join(output_dir, out_block.get("path", "trajectory.csv"))
    traj = dynamics.integrate(model, potential, state0, t_end, control)
    io.write_trajectory_csv(path, traj)
    line = (f"simulate: kind={model.kind} samples={len(traj.times)} "
            f"energy_drift={traj.energy_drift:.3e} "
            f"casimir_drift={traj.casimir_drift:.3e} artifact={path}")
    if not quiet:
        print(line)
    return 0


def _cmd_geodesic(config, output_dir, rng, quiet):
    _check_keys(config, ("model", "initial", "numerics"),
                ("command", "output", "seed"), "config")
    model = phase.ModelSpec.from_json(config["model"])
    init = _check_keys(config["initial"], ("phi0", "Omega"), (), "initial")
    phi0 = np.asarray(init["phi0"], dtype=float)
    Omega = np.asarray(init["Omega"], dtype=float)
    control, t_end = _control_from_json(config["numerics"])
    samples = int(config["numerics"].get("samples", 11))
    tol = float(config["numerics"].get("tolerance", 1e-6))
    report = geodesic_cross_check(model, phi0, Omega, t_end,
                                  step=control.step, samples=samples)
    verdict = "PASS" if report["max_error"] < tol else "FAIL"
    report["tolerance"] = tol
    report["verdict"] = verdict
    out_block = config.get("output") or {}
    _check_keys(out_block, (), ("path", "format"), "output")
    path = os.path.join(output_dir, out_block.get("path", "geodesic.json"))
    io.write_json(path, report)
    if not quiet:
        print(f"geodesic: max_error={report['max_error']:.3e} "
              f"verdict={verdict} artifact={path}")
    return 0 if verdict == "PASS" else 1


def _cmd_classify(config, output_dir, rng, quiet):
    _check_keys(config, ("m", "n"),
                ("command", "A", "energy", "output", "seed"), "config")
    m = float(config["m"])
    n_coupling = float(config["n"])
    A = float(config.get("A", 1.0))
    energy = config.get("energy")
    result = dynamics.classify_planar(m, n_coupling, A=A,
                                      energy=None if energy is None
                                      else float(energy))
    report = {
        "verdict": result.verdict, "m": m, "n": n_coupling, "A": A,
        "energy": result.energy, "x_min": result.x_min,
        "turning_points": list(result.turning_points)
        if result.turning_points is not None else None,
        "period": result.period,
    }
    out_block = config.get("output") or {}
    _check_keys(out_block, (), ("path", "format"), "output")
    path = os.path.join(output_dir, out_block.get("path", "classify.json"))
    io.write_json(path, report)
    if not quiet:
        extra = "" if result.period is None \
            else f" period={result.period:.6g}"
        print(f"classify: verdict={result.verdict} m={m:g} "
              f"n={n_coupling:g}{extra} artifact={path}")
    return 0


def _cmd_spectrum(config, output_dir, rng, quiet):
    _check_keys(config, ("problem",),
                ("command", "count", "eigenvectors", "output", "seed"),
                "config")
    pb = dict(config["problem"])
    allowed = ("n", "model", "alpha_label", "beta_label", "coordinate",
               "q_min", "q_max", "points", "boundary", "potential",
               "use_amended_transform", "half_integer_labels")
    _check_keys(pb, ("n", "model"), [k for k in allowed
                                     if k not in ("n", "model")], "problem")
    pb["model"] = phase.ModelSpec.from_json(pb["model"])
    if "potential" in pb:
        pb["potential"] = _potential_from_json(pb["potential"])
    problem = quantum.SpectralProblem(**pb)
    count = int(config.get("count", 5))
    op = quantum.build_reduced_hamiltonian(problem)
    spec = quantum.eigensolve(op, count)
    report = {
        "problem": problem.to_json(),
        "eigenvalues": [float(v) for v in spec.eigenvalues],
        "residuals": [float(r) for r in spec.residuals],
        "grid": {"q_min": problem.q_min, "q_max": problem.q_max,
                 "points": problem.points},
        "boundary": problem.boundary,
    }
    out_block = config.get("output") or {}
    _check_keys(out_block, (), ("path", "format"), "output")
    path = os.path.join(output_dir, out_block.get("path", "spectrum.json"))
    io.write_json(path, report)
    if config.get("eigenvectors"):
        vec_path = os.path.splitext(path)[0] + "_vectors.csv"
        _write_eigenvectors(vec_path, op, spec)
    shown = ", ".join(f"{v:.9g}" for v in spec.eigenvalues[:5])
    if not quiet:
        print(f"spectrum: count={count} eigenvalues=[{shown}] "
              f"max_residual={float(np.max(spec.residuals)):.3e} "
              f"artifact={path}")
    return 0


def _write_eigenvectors(path, op, spec):
    ds, dj = op.block_shape
    bdim = ds * dj
    rows = []
    for k in range(spec.eigenvectors.shape[1]):
        v = spec.eigenvectors[:, k]
        for idx, amp in enumerate(v):
            node = idx // bdim
            block = idx % bdim
            rows.append([k, node, block // dj, block % dj,
                         amp.real, np.imag(amp)])
    header = "level,node,m_row,k_col,real,imag"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(io.format_float(x) if isinstance(x, float)
                              else str(x) for x in row) + "\n")


def _cmd_check_brackets(config, output_dir, rng, quiet):
    _check_keys(config, (), ("command", "trials", "n", "output", "seed"),
                "config")
    trials = int(config.get("trials", 200))
    n = int(config.get("n", 3))
    report = check_brackets(rng, trials=trials, n=n)
    out_block = config.get("output") or {}
    _check_keys(out_block, (), ("path", "format"), "output")
    path = os.path.join(output_dir,
                        out_block.get("path", "brackets.json"))
    io.write_json(path, report)
    if not quiet:
        print(f"check-brackets: trials={trials} "
              f"max_residual={report['max_residual']:.3e} "
              f"verdict={report['verdict']} artifact={path}")
    return 0 if report["verdict"] == "PASS" else 1


def _cmd_check_decomp(config, output_dir, rng, quiet):
    _check_keys(config, (), ("command", "trials", "dims", "cond_max",
                             "output", "seed"), "config")
    trials = int(config.get("trials", 1000))
    dims = tuple(config.get("dims", (2, 3)))
    cond_max = float(config.get("cond_max", 1e6))
    report = check_decomposition(rng, trials=trials, dims=dims,
                                 cond_max=cond_max)
    out_block = config.get("output") or {}
    _check_keys(out_block, (), ("path", "format"), "output")
    path = os.path.join(output_dir, out_block.get("path", "decomp.json"))
    io.write_json(path, report)
    if not quiet:
        print(f"check-decomp: trials={trials} "
              f"max_reconstruction={report['max_reconstruction']:.3e} "
              f"max_orthogonality={report['max_orthogonality']:.3e} "
              f"verdict={report['verdict']} artifact={path}")
    return 0 if report["verdict"] == "PASS" else 1


# ---------------------------------------------------------------------------
# verification harnesses (shared with the test suite)


def random_configuration(rng, n, cond_max=1e6):
    """Random orientation-preserving matrix with a bounded condition
    number."""
    while True:
        raw = rng.standard_normal((n, n))
        u, s, vt = np.linalg.svd(raw)
        if s[-1] <= 0:
            continue
        # compress the singular-value spread into the allowed range
        log_s = np.log(s)
        spread = log_s[0] - log_s[-1]
        budget = np.log(cond_max) * rng.uniform(0.05, 0.95)
        if spread > budget:
            log_s = log_s[-1] + (log_s - log_s[-1]) * budget / spread
        s = np.exp(log_s + rng.uniform(-1.0, 1.0))
        phi = u @ np.diag(s) @ vt
        if np.linalg.det(phi) < 0:
            u[:, -1] *= -1.0
            phi = u @ np.diag(s) @ vt
        return phi


def random_state(rng, n, scale=1.0, min_gap=0.05):
    """Random nondegenerate reduced state."""
    while True:
        q = np.sort(rng.uniform(-1.5, 1.5, n))[::-1].copy()
        gaps = q[:-1] - q[1:]
        if n == 1 or np.min(gaps) > min_gap:
            break
    p = rng.standard_normal(n) * scale
    M = rng.standard_normal((n, n)) * scale
    N = rng.standard_normal((n, n)) * scale
    return phase.ReducedState(q, p, M=M - M.T, N=N - N.T)


def random_linear_observable(rng, n):
    CM = rng.standard_normal((n, n))
    CN = rng.standard_normal((n, n))
    return poisson.LinearObservable(
        n=n, c0=rng.standard_normal(),
        cq=rng.standard_normal(n), cp=rng.standard_normal(n),
        CM=CM - CM.T, CN=CN - CN.T)


def check_brackets(rng, trials=200, n=3):
    """Antisymmetry, Jacobi, and Leibniz residuals of the reduced bracket
    over random observables and states."""
    max_anti = 0.0
    max_jacobi = 0.0
    max_leibniz = 0.0
    for _ in range(trials):
        F = random_linear_observable(rng, n)
        G = random_linear_observable(rng, n)
        H = random_linear_observable(rng, n)
        state = random_state(rng, n)
        fg = poisson.poisson_bracket(F, G, state)
        gf = poisson.poisson_bracket(G, F, state)
        max_anti = max(max_anti, abs(fg + gf))
        # inner brackets of linear observables are again linear, so the
        # Jacobi identity can be evaluated without finite differences
        gh = poisson.bracket_observable(G, H)
        hf = poisson.bracket_observable(H, F)
        fg_obs = poisson.bracket_observable(F, G)
        jac = (poisson.poisson_bracket(F, gh, state)
               + poisson.poisson_bracket(G, hf, state)
               + poisson.poisson_bracket(H, fg_obs, state))
        max_jacobi = max(max_jacobi, abs(jac))
        FG = poisson.ProductObservable(F, G)
        lhs = poisson.poisson_bracket(FG, H, state)
        rhs = (F.value(state) * poisson.poisson_bracket(G, H, state)
               + G.value(state) * poisson.poisson_bracket(F, H, state))
        max_leibniz = max(max_leibniz, abs(lhs - rhs))
    worst = max(max_anti, max_jacobi, max_leibniz)
    return {
        "trials": trials, "n": n,
        "max_antisymmetry": max_anti, "max_jacobi": max_jacobi,
        "max_leibniz": max_leibniz, "max_residual": worst,
        "tolerance": BRACKET_TOL,
        "verdict": "PASS" if worst < BRACKET_TOL else "FAIL",
    }


def check_decomposition(rng, trials=1000, dims=(2, 3), cond_max=1e6):
    """Two-polar and polar reconstruction residuals over random
    configurations, with singular values checked against an independent
    eigen-decomposition of phi^T phi."""
    max_recon = 0.0
    max_ortho = 0.0
    max_sv = 0.0
    for k in range(trials):
        n = dims[k % len(dims)]
        phi = random_configuration(rng, n, cond_max=cond_max)
        scale = np.linalg.norm(phi)
        tp = kinematics.two_polar(phi)
        max_recon = max(max_recon,
                        np.linalg.norm(tp.reconstruct() - phi) / scale)
        eye = np.eye(n)
        max_ortho = max(
            max_ortho,
            np.linalg.norm(tp.L.T @ tp.L - eye),
            np.linalg.norm(tp.R.T @ tp.R - eye))
        # independent oracle: sqrt of the Green tensor spectrum
        ev = np.linalg.eigvalsh(phi.T @ phi)
        oracle = np.sqrt(np.sort(ev)[::-1])
        sv = np.sort(np.exp(tp.q))[::-1]
        max_sv = max(max_sv,
                     np.max(np.abs(sv - oracle)) / max(oracle[0], 1.0))
        pol = kinematics.polar_decompose(phi)
        max_recon = max(max_recon,
                        np.linalg.norm(pol.reconstruct() - phi) / scale)
        max_ortho = max(max_ortho,
                        np.linalg.norm(pol.U.T @ pol.U - eye))
    ok = (max_recon < DECOMP_RECON_TOL and max_ortho < DECOMP_ORTHO_TOL
          and max_sv < DECOMP_SV_TOL)
    return {
        "trials": trials, "dims": list(dims), "cond_max": cond_max,
        "max_reconstruction": max_recon, "max_orthogonality": max_ortho,
        "max_singular_value_error": max_sv,
        "tolerances": {"reconstruction": DECOMP_RECON_TOL,
                       "orthogonality": DECOMP_ORTHO_TOL,
                       "singular_values": DECOMP_SV_TOL},
        "verdict": "PASS" if ok else "FAIL",
    }


def geodesic_cross_check(model, phi0, Omega, t_end, step=1e-3, samples=11):
    """Compare the reduced state along phi(t) = exp(Omega t) phi0 against
    direct integration of the reduced equations of motion."""
    state0, tp0 = dynamics.reduced_state_from_velocity(phi0, Omega, model)
    potential = phase.PotentialSpec.none()
    times = np.linspace(0.0, t_end, samples)
    control = dynamics.StepControl(method="rk4", step=step)
    traj = dynamics.integrate(model, potential, state0, t_end, control)
    max_err = 0.0
    ref = tp0
    for t in times:
        cfg = dynamics.geodesic_exponential(phi0, Omega, t)
        extracted, ref = dynamics.reduced_state_from_velocity(
            cfg.phi, Omega, model, reference=ref)
        k = int(np.argmin(np.abs(np.asarray(traj.times) - t)))
        integ = traj.state(k)
        for a, b in ((extracted.q, integ.q), (extracted.p, integ.p),
                     (extracted.M, integ.M), (extracted.N, integ.N)):
            max_err = max(max_err, float(np.max(np.abs(a - b))))
    return {"max_error": max_err, "t_end": t_end, "samples": samples,
            "step": step}


# ---------------------------------------------------------------------------
# entry point


_DISPATCH = {
    "simulate": _cmd_simulate,
    "geodesic": _cmd_geodesic,
    "classify": _cmd_classify,
    "spectrum": _cmd_spectrum,
    "check-brackets": _cmd_check_brackets,
    "check-decomp": _cmd_check_decomp,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="affine-body",
        description="affinely-rigid body experiment runner")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--output-dir", default=".")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    try:
        try:
            config = io.load_json(args.config)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config: {exc}")
        if not isinstance(config, dict):
            raise ConfigError("config must be a JSON object")
        declared = config.get("command")
        if declared is not None and declared != args.command:
            raise ConfigError(
                f"config declares command {declared!r}, "
                f"invoked as {args.command!r}")
        seed = args.seed
        if seed is None:
            seed = config.get("seed", 0)
        rng = np.random.default_rng(int(seed))
        os.makedirs(args.output_dir, exist_ok=True)
        return _DISPATCH[args.command](config, args.output_dir, rng,
                                       args.quiet)
    except AffineBodyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
