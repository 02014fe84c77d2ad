"""
Servo LQ de horizonte infinito: síntesis de la ganancia aumentada con la
DARE y ley de control por paso con acción integral.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from quadsim.exceptions import UnstableClosedLoopError
from quadsim.estimator import N_INT
from quadsim.model import N_INPUTS, N_STATES, ControlInput
from quadsim.numerics import DARE_MAX_ITER, DARE_TOL, as_spd, solve_dare, spectral_radius

logger = logging.getLogger(__name__)

OUTAGE_POLICIES = ("accumulate", "hold", "estimate")

# Orden: x y z φ θ ψ ẋ ẏ ż φ̇ θ̇ ψ̇ ix iy iz
_Q_DEFAULT = (1.745, 1.745, 12.66, 8.35, 8.35, 2.0, 0.346, 0.346, 2.5, 0.0081, 0.0081, 0.01, 6.98e-4, 6.98e-4, 5.06e-3)
_Q_TIERED = (10, 10, 10, 1, 1, 1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 1, 1, 1)
_R_DEFAULT = (0.1, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class LqWeights:
    q_bar: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        q_bar = as_spd(self.q_bar, name="Q̄")
        r = as_spd(self.r, definite=True, name="R")
        if q_bar.shape != (N_STATES + N_INT,) * 2 or r.shape != (N_INPUTS, N_INPUTS):
            raise ValueError(f"Q̄ debe ser 15×15 y R 4×4; se recibieron {q_bar.shape} y {r.shape}")
        object.__setattr__(self, "q_bar", q_bar)
        object.__setattr__(self, "r", r)

    @classmethod
    def default(cls):
        """Pesos por defecto, ubicados por lugar de raíces simétrico en cada canal desacoplado."""
        return cls(np.diag(_Q_DEFAULT), np.diag(_R_DEFAULT))

    @classmethod
    def tiered(cls):
        """Posición 10, actitud 1, velocidades 0.1, integradores 1."""
        return cls(np.diag(np.asarray(_Q_TIERED, dtype=float)), np.diag(_R_DEFAULT))

    @classmethod
    def preset(cls, name):
        presets = {"default": cls.default, "tiered": cls.tiered}
        if name not in presets:
            raise ValueError(f"Preset de pesos desconocido: '{name}'. Opciones: {sorted(presets)}")
        return presets[name]()


@dataclass(frozen=True)
class ServoGain:
    l_xhat: np.ndarray
    l_i: np.ndarray
    spectral_radius: float = float("nan")
    s: np.ndarray | None = None

    @property
    def full(self):
        return np.hstack([self.l_xhat, self.l_i])


@dataclass(frozen=True)
class IntegratorState:
    i: np.ndarray = field(default_factory=lambda: np.zeros(N_INT))

    def __post_init__(self):
        i = np.asarray(self.i, dtype=float).reshape(N_INT)
        if not np.all(np.isfinite(i)):
            raise ValueError("Integrador no finito")
        object.__setattr__(self, "i", i)


def lq_gain(phi, gamma, q, r, max_iter=DARE_MAX_ITER, tol=DARE_TOL):
    """
    Ganancia LQ estacionaria L = (ΓᵀSΓ + R)⁻¹ΓᵀSΦ.

    Returns:
        tuple: (L, S) con S la solución de la DARE.
    """
    s = solve_dare(phi, gamma, q, r, max_iter=max_iter, tol=tol)
    sg = s @ gamma
    l = np.linalg.solve(gamma.T @ sg + r, sg.T @ phi)
    return l, s


def compute_gain(am, w, max_iter=DARE_MAX_ITER):
    """
    Sintetiza L∞ = [L^x̂ L^i] sobre el modelo aumentado nominal.

    Args:
        am (AugmentedModel): Modelo con Φ̄ armado para disponibilidad completa.
        w (LqWeights): Pesos del criterio cuadrático.
        max_iter (int, optional): Máximo de iteraciones de la DARE.

    Returns:
        ServoGain: Ganancia con el radio espectral de lazo cerrado.

    Raises:
        DareConvergenceError: Si la DARE no converge.
        UnstableClosedLoopError: Si ρ(Φ̄ − Γ̄L) ≥ 1.
    """
    l, s = lq_gain(am.phi_bar, am.gamma_bar, w.q_bar, w.r, max_iter=max_iter)
    rho = spectral_radius(am.phi_bar - am.gamma_bar @ l)
    if rho >= 1.0:
        raise UnstableClosedLoopError(rho)
    logger.info("Radio espectral de lazo cerrado: %.6f", rho)
    return ServoGain(l_xhat=l[:, :N_STATES], l_i=l[:, N_STATES:], spectral_radius=rho, s=s)


def equilibrium_integrator(g, x_hat):
    """
    Integrador que anula la ley de control en x̂: mínimos cuadrados de L^i·i = −L^x̂·x̂.

    La realimentación es sobre la posición absoluta, así que mantener el
    vehículo quieto en un punto exige un sesgo del integrador que depende
    de ese punto. Un vector de 3 componentes se toma como posición con el
    resto del estado en cero.

    Args:
        g (ServoGain): Ganancia del servo.
        x_hat (array_like): Posición (3) o estado físico (12).

    Returns:
        numpy.ndarray: i con u(x̂, i) = 0 en el sentido de mínimos cuadrados.
    """
    v = np.asarray(x_hat, dtype=float).ravel()
    if v.size not in (3, N_STATES):
        raise ValueError(f"Se espera una posición o un estado de {N_STATES} componentes, tamaño {v.size}")
    x = np.zeros(N_STATES)
    x[: v.size] = v
    return np.linalg.lstsq(g.l_i, -g.l_xhat @ x, rcond=None)[0]


def reference_increment(r, e, outage_policy="accumulate", position_estimate=None):
    """
    Incremento que realmente entra al integrador este paso.

    Con posición disponible es siempre r. Con E = 0, "accumulate" suma r,
    "hold" no suma nada y "estimate" suma r − p̂ con la posición estimada.
    """
    if outage_policy not in OUTAGE_POLICIES:
        raise ValueError(f"Política de apagón desconocida: '{outage_policy}'")
    r = np.asarray(r, dtype=float)
    if np.any(e) or outage_policy == "accumulate":
        return r
    if outage_policy == "hold":
        return np.zeros_like(r)
    if position_estimate is None:
        raise ValueError("La política 'estimate' requiere la posición estimada")
    return r - np.asarray(position_estimate, dtype=float)[:3]


def integral_update(i, r, frame, e, outage_policy="accumulate", clamp=None, position_estimate=None, center=None):
    """
    i₊ = i + r − E·y, con recorte anti-windup opcional.

    Args:
        i (IntegratorState): Integrador actual.
        r (array_like): Referencia del paso.
        frame (MeasurementFrame): Trama del paso.
        e (numpy.ndarray): Selección de posición E_k.
        outage_policy (str, optional): Tratamiento de pasos sin posición.
        clamp (float, optional): Cota anti-windup por eje.
        position_estimate (array_like, optional): p̂ para la política "estimate".
        center (array_like, optional): Centro del recorte; por defecto cero.

    Returns:
        IntegratorState: Integrador actualizado.
    """
    i_next = i.i + reference_increment(r, e, outage_policy, position_estimate) - e @ frame.y
    if clamp is not None:
        c = np.zeros(N_INT) if center is None else np.asarray(center, dtype=float)
        i_next = c + np.clip(i_next - c, -clamp, clamp)
    return IntegratorState(i_next)


def control_law(g, x_hat, i):
    """u = −L^x̂·x̂ − L^i·i en variables de desviación."""
    u = -g.l_xhat @ np.asarray(x_hat, dtype=float)[:N_STATES] - g.l_i @ i.i
    return ControlInput.from_vector(u)
