"""
Primitivas matriciales y estocásticas: discretización ZOH, DARE, radio
espectral y muestreo gaussiano multivariado.

Todas las funciones son puras sobre sus entradas; el estado aleatorio vive
en el generador que se pasa como argumento.
"""

import logging

import numpy as np
from scipy.linalg import expm

from quadsim.exceptions import DareConvergenceError

logger = logging.getLogger(__name__)

DARE_MAX_ITER = 10_000
DARE_TOL = 1e-9
SYM_TOL = 1e-12


def _as_finite_matrix(m, name):
    arr = np.atleast_2d(np.asarray(m, dtype=float))
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"'{name}' debe ser una matriz no vacía")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"'{name}' contiene valores no finitos")
    return arr


def symmetrize(m):
    """Devuelve (M + Mᵀ)/2."""
    return 0.5 * (m + m.T)


def as_spd(m, definite=False, name="matriz"):
    """
    Valida y simetriza una matriz de covarianza.

    Args:
        m (array_like): Matriz cuadrada.
        definite (bool, optional): Exigir definida positiva en lugar de semidefinida.
        name (str, optional): Nombre para los mensajes de error.

    Returns:
        numpy.ndarray: Matriz simetrizada.
    """
    arr = _as_finite_matrix(m, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"'{name}' debe ser cuadrada, tiene forma {arr.shape}")
    scale = max(np.max(np.abs(arr)), 1.0)
    if np.max(np.abs(arr - arr.T)) > SYM_TOL * scale:
        raise ValueError(f"'{name}' no es simétrica")
    arr = symmetrize(arr)
    eig = np.linalg.eigvalsh(arr)
    if definite:
        if eig[0] <= 0.0:
            raise ValueError(f"'{name}' no es definida positiva (autovalor mínimo {eig[0]:.3e})")
    elif eig[0] < -SYM_TOL * max(eig[-1], 0.0):
        raise ValueError(f"'{name}' no es semidefinida positiva (autovalor mínimo {eig[0]:.3e})")
    return arr


def discretize_zoh(a, b, h):
    """
    Discretiza (A, B) con retenedor de orden cero.

    Una sola exponencial de la matriz aumentada [[A, B], [0, 0]]·h entrega
    Φ en el bloque superior izquierdo y Γ en el superior derecho.

    Args:
        a (array_like): Matriz de sistema continua n×n.
        b (array_like): Matriz de entrada continua n×m.
        h (float): Periodo de muestreo en segundos.

    Returns:
        tuple: (phi, gamma) matrices discretas.
    """
    if not np.isfinite(h) or h <= 0:
        raise ValueError(f"El periodo de muestreo debe ser positivo, se recibió {h}")
    a = _as_finite_matrix(a, "a")
    b = _as_finite_matrix(b, "b")
    n, m = a.shape[0], b.shape[1]
    if a.shape != (n, n) or b.shape[0] != n:
        raise ValueError(f"Dimensiones incompatibles: a {a.shape}, b {b.shape}")

    # M = [A  B]
    #     [0  0]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = a
    aug[:n, n:] = b
    e = expm(aug * h)
    return e[:n, :n], e[:n, n:]


def riccati_step(phi, gamma, q, r, s):
    """Un paso de la recursión de Riccati hacia atrás."""
    sg = s @ gamma
    gain_term = phi.T @ sg @ np.linalg.solve(gamma.T @ sg + r, sg.T @ phi)
    return symmetrize(q + phi.T @ s @ phi - gain_term)


def dare_residual(phi, gamma, q, r, s):
    """Norma infinito del residuo de la DARE evaluada en S."""
    return np.linalg.norm(s - riccati_step(phi, gamma, q, r, s), ord=np.inf)


def solve_dare(phi, gamma, q, r, max_iter=DARE_MAX_ITER, tol=DARE_TOL):
    """
    Resuelve la DARE por iteración de punto fijo a partir de S = Q.

    Args:
        phi (array_like): Matriz de sistema discreta.
        gamma (array_like): Matriz de entrada discreta.
        q (array_like): Peso de estado (semidefinido positivo).
        r (array_like): Peso de control (definido positivo).
        max_iter (int, optional): Máximo de iteraciones.
        tol (float, optional): Tolerancia relativa del residuo.

    Returns:
        numpy.ndarray: Solución S simétrica semidefinida positiva.
    """
    phi = _as_finite_matrix(phi, "phi")
    gamma = _as_finite_matrix(gamma, "gamma")
    q = as_spd(q, name="q")
    r = as_spd(r, definite=True, name="r")
    n = phi.shape[0]
    if phi.shape != (n, n) or gamma.shape[0] != n or q.shape != (n, n) or r.shape[0] != gamma.shape[1]:
        raise ValueError("Dimensiones incompatibles en la DARE")

    s = q.copy()
    residual = np.inf
    for it in range(1, max_iter + 1):
        s_next = riccati_step(phi, gamma, q, r, s)
        if not np.all(np.isfinite(s_next)):
            raise DareConvergenceError(residual, it)
        # ‖S − ric(S)‖ es exactamente dare_residual(S)
        residual = np.linalg.norm(s - s_next, ord=np.inf)
        if residual < tol * (1.0 + np.linalg.norm(s, ord=np.inf)):
            # se prefiere el iterado siguiente si también cumple la cota
            residual_next = dare_residual(phi, gamma, q, r, s_next)
            if residual_next < tol * (1.0 + np.linalg.norm(s_next, ord=np.inf)):
                s, residual = s_next, residual_next
            logger.debug("DARE resuelta en %d iteraciones (residuo %.3e)", it, residual)
            return s
        s = s_next
    raise DareConvergenceError(residual, max_iter)


def spectral_radius(m):
    """Máximo módulo de los autovalores de una matriz cuadrada."""
    m = _as_finite_matrix(m, "m")
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"Se requiere una matriz cuadrada, forma {m.shape}")
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def _covariance_factor(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # Semidefinida singular: factor por autovalores
        eig, vec = np.linalg.eigh(cov)
        if eig[0] < -SYM_TOL * max(eig[-1], 1.0):
            raise ValueError(f"Covarianza indefinida (autovalor mínimo {eig[0]:.3e})") from None
        return vec * np.sqrt(np.clip(eig, 0.0, None))


def sample_mvn(mean, cov, rng):
    """
    Extrae una muestra gaussiana multivariada.

    Args:
        mean (array_like): Media de dimensión n.
        cov (array_like): Covarianza n×n semidefinida positiva.
        rng (numpy.random.Generator): Flujo aleatorio de la corrida.

    Returns:
        numpy.ndarray: Muestra de dimensión n.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (mean.size, mean.size):
        raise ValueError(f"Covarianza {cov.shape} incompatible con media de tamaño {mean.size}")
    if not np.any(cov):
        return mean.copy()
    factor = _covariance_factor(symmetrize(cov))
    return mean + factor @ rng.standard_normal(mean.size)
