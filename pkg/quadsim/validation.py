"""
Verificaciones de invariantes fuera de pytest, para el subcomando
`validate` de la línea de comandos.
"""

import logging
from dataclasses import replace

import numpy as np
import pandas as pd
from tqdm import tqdm

from quadsim.estimator import N_AUG, AugmentedEstimate, kf_step, selection_matrix
from quadsim.harness import build_design, rk4_step, simulate_run
from quadsim.metrics import nees, nees_band
from quadsim.model import N_STATES, PlantState, continuous_linear_matrices, hover_input
from quadsim.numerics import dare_residual, discretize_zoh, sample_mvn, solve_dare
from quadsim.sensors import AvailabilityMask, MeasurementFrame

logger = logging.getLogger(__name__)

GOLDEN_RATIO = (1.0 + np.sqrt(5.0)) / 2.0


def _result(check, passed, value, threshold, detail=""):
    return {"check": check, "passed": bool(passed), "value": float(value), "threshold": threshold, "detail": detail}


def check_zoh(p):
    """Φ y Γ contra la serie exacta de cuatro términos (A⁴ = 0)."""
    a, b = continuous_linear_matrices(p)
    h = p.h
    eye = np.eye(a.shape[0])
    a2, a3 = a @ a, a @ a @ a
    phi_ref = eye + a * h + a2 * h**2 / 2 + a3 * h**3 / 6
    gamma_ref = (eye * h + a * h**2 / 2 + a2 * h**3 / 6 + a3 * h**4 / 24) @ b
    phi, gamma = discretize_zoh(a, b, h)
    err = max(np.max(np.abs(phi - phi_ref)), np.max(np.abs(gamma - gamma_ref)))
    return _result("zoh_serie_nilpotente", err < 1e-10, err, 1e-10)


def check_scalar_dare():
    s = solve_dare(np.eye(1), np.eye(1), np.eye(1), np.eye(1))
    err = abs(s[0, 0] - GOLDEN_RATIO)
    return _result("dare_escalar", err < 1e-9, err, 1e-9)


def check_dare_residual(design, weights):
    am = design.augmented
    s = design.gain.s
    res = dare_residual(am.phi_bar, am.gamma_bar, weights.q_bar, weights.r, s)
    bound = 1e-9 * (1.0 + np.linalg.norm(s, ord=np.inf))
    return _result("dare_residuo", res < bound, res, bound)


def check_closed_loop(design):
    rho = design.gain.spectral_radius
    return _result("lazo_cerrado_estable", rho < 1.0, rho, 1.0)


def linearization_gap(p, eps):
    """Diferencia a un paso entre la planta no lineal (RK4) y el modelo lineal discreto."""
    x0 = np.zeros(N_STATES)
    x0[3:5] = eps
    a, b = continuous_linear_matrices(p)
    phi, _ = discretize_zoh(a, b, p.h)
    nonlinear = rk4_step(PlantState.from_vector(x0), hover_input(p), p, p.h).as_vector()
    return float(np.linalg.norm(nonlinear - phi @ x0))


def check_linearization(p, eps=0.1):
    ratio = linearization_gap(p, eps) / linearization_gap(p, eps / 2)
    return _result("linealizacion_segundo_orden", ratio >= 3.5, ratio, 3.5)


def check_determinism(sc, duration=2.0):
    short = replace(sc, duration=min(duration, sc.duration))
    design = build_design(short)
    a = simulate_run(short, short.seed, design)
    b = simulate_run(short, short.seed, design)
    same = all(
        np.array_equal(getattr(a, n), getattr(b, n)) for n in ("truth", "estimate", "reference", "control", "mask")
    )
    return _result("determinismo", same, float(same), 1.0)


def nees_consistency(sc, n_runs=200, n_steps=500, seed=12345, progress=False):
    """
    NEES del estado físico sobre el modelo lineal aumentado con ruido igualado.

    La verdad se propaga con Φ̄, Ē y las mismas covarianzas que usa el filtro,
    con disponibilidad completa y entrada nula.

    Returns:
        tuple: (NEES promediado sobre corridas por paso, banda (inferior, superior)).
    """
    design = build_design(sc)
    am = design.augmented
    mask = AvailabilityMask(True, True, True)
    e = selection_matrix(mask)
    phi_bar, e_bar = am.phi_bar_for(e), am.e_bar_for(e)
    p0 = sc.initial_covariance()
    u = np.zeros(am.gamma_bar.shape[1])
    r = np.zeros(3)
    n_y = am.c_bar.shape[0]

    rng = np.random.default_rng(seed)
    total = np.zeros(n_steps)
    for _ in tqdm(range(n_runs), disable=not progress, desc="NEES"):
        x = sample_mvn(np.zeros(N_AUG), p0, rng)
        est = AugmentedEstimate(x_hat=np.zeros(N_AUG), p=p0)
        errors = np.zeros((n_steps, N_STATES))
        covs = np.zeros((n_steps, N_STATES, N_STATES))
        for k in range(n_steps):
            errors[k] = x[:N_STATES] - est.x_hat[:N_STATES]
            covs[k] = est.p[:N_STATES, :N_STATES]
            noise = sample_mvn(np.zeros(am.v1.shape[0]), am.v1, rng)
            y = am.c_bar @ x + noise[N_STATES:N_STATES + n_y]
            est = kf_step(est, am, MeasurementFrame(y=y, mask=mask), u, r)
            x = phi_bar @ x + e_bar @ noise
        total += nees(errors, covs)
    return total / n_runs, nees_band(N_STATES, n_runs)


def check_nees(sc, n_runs=200, n_steps=500, min_fraction=0.9):
    avg, (lo, hi) = nees_consistency(sc, n_runs=n_runs, n_steps=n_steps)
    fraction = float(np.mean((avg >= lo) & (avg <= hi)))
    detail = f"NEES medio {np.mean(avg):.3f}, banda [{lo:.3f}, {hi:.3f}]"
    return _result("nees_consistencia", fraction >= min_fraction, fraction, min_fraction, detail)


def run_validation(sc, include_nees=True):
    """
    Ejecuta todas las verificaciones.

    Returns:
        pandas.DataFrame: Una fila por verificación.
    """
    design = build_design(sc)
    results = [
        check_zoh(sc.params),
        check_scalar_dare(),
        check_dare_residual(design, sc.weights),
        check_closed_loop(design),
        check_linearization(sc.params),
        check_determinism(sc),
    ]
    if include_nees:
        results.append(check_nees(sc))
    df = pd.DataFrame(results)
    for row in df.itertuples():
        log = logger.info if row.passed else logger.warning
        log("%s: %s (valor %.3e, umbral %s)", row.check, "OK" if row.passed else "FALLA", row.value, row.threshold)
    return df
