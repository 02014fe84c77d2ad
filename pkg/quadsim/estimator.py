"""
Filtro de Kalman de estado aumentado con observaciones intermitentes y
ruido de proceso y medición correlacionado.

El estado aumentado es x̄ = [x (12); i (3)], donde i acumula el error de
seguimiento de posición. La matriz de selección E_k cambia con la
disponibilidad de sensores y entra tanto en Φ̄ como en Ē.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, block_diag, cho_factor, cho_solve

from quadsim.exceptions import SingularInnovationError
from quadsim.model import N_INPUTS, N_OUTPUTS, N_STATES, ControlInput
from quadsim.numerics import as_spd, symmetrize
from quadsim.sensors import BLOCKS, AvailabilityMask

logger = logging.getLogger(__name__)

N_INT = 3
N_AUG = N_STATES + N_INT
N_NOISE = N_STATES + N_OUTPUTS


def selection_matrix(mask):
    """
    Matriz E (3×9) que elige la fuente de posición para la acción integral.

    UWB tiene prioridad; si no está disponible se usa YOLO; sin ninguna de
    las dos, E = 0.
    """
    e = np.zeros((N_INT, N_OUTPUTS))
    if mask.uwb:
        e[:, BLOCKS[0]] = np.eye(3)
    elif mask.yolo:
        e[:, BLOCKS[1]] = np.eye(3)
    return e


NOMINAL_SELECTION = selection_matrix(AvailabilityMask(True, True, True))


def _phi_bar(phi, c, e):
    """Φ̄ = [[Φ, 0], [−E·C, I]] para la selección del paso."""
    out = np.eye(N_AUG)
    out[:N_STATES, :N_STATES] = phi
    out[N_STATES:, :N_STATES] = -e @ c
    return out


@dataclass(frozen=True)
class AugmentedModel:
    phi: np.ndarray
    gamma: np.ndarray
    c: np.ndarray
    phi_bar: np.ndarray
    gamma_bar: np.ndarray
    c_bar: np.ndarray
    i_bar: np.ndarray
    v1: np.ndarray
    v12: np.ndarray
    v2: np.ndarray

    def phi_bar_for(self, e):
        return _phi_bar(self.phi, self.c, e)

    @staticmethod
    def e_bar_for(e):
        """Ē = [[I₁₂, 0], [0, −E]] (15×21)."""
        out = np.zeros((N_AUG, N_NOISE))
        out[:N_STATES, :N_STATES] = np.eye(N_STATES)
        out[N_STATES:, N_STATES:] = -e
        return out


@dataclass(frozen=True)
class AugmentedEstimate:
    x_hat: np.ndarray
    p: np.ndarray
    gain: np.ndarray | None = None

    @property
    def physical(self):
        return self.x_hat[:N_STATES]

    @property
    def integrators(self):
        return self.x_hat[N_STATES:]


def build_augmented(dm, e_nominal=NOMINAL_SELECTION):
    """
    Arma todas las matrices de bloques del modelo aumentado.

    Args:
        dm (DiscreteModel): Modelo discreto de diseño.
        e_nominal (numpy.ndarray, optional): Selección usada para el Φ̄ nominal.

    Returns:
        AugmentedModel: Modelo aumentado con V₁ = diag(W, V), V₁₂ = [0; V], V₂ = V.
    """
    n, m = dm.gamma.shape
    if dm.phi.shape != (N_STATES, N_STATES) or (n, m) != (N_STATES, N_INPUTS):
        raise ValueError(f"Dimensiones de Φ/Γ inválidas: {dm.phi.shape}, {dm.gamma.shape}")
    if dm.c.shape != (N_OUTPUTS, N_STATES):
        raise ValueError(f"C debe ser 9×12, tiene forma {dm.c.shape}")
    if dm.w.shape != (N_STATES, N_STATES) or dm.v.shape != (N_OUTPUTS, N_OUTPUTS):
        raise ValueError(f"W debe ser 12×12 y V 9×9; se recibieron {dm.w.shape} y {dm.v.shape}")
    v2 = as_spd(dm.v, definite=True, name="V")

    gamma_bar = np.vstack([dm.gamma, np.zeros((N_INT, N_INPUTS))])
    c_bar = np.hstack([dm.c, np.zeros((N_OUTPUTS, N_INT))])
    i_bar = np.vstack([np.zeros((N_STATES, N_INT)), np.eye(N_INT)])
    v12 = np.vstack([np.zeros((N_STATES, N_OUTPUTS)), v2])

    return AugmentedModel(
        phi=dm.phi,
        gamma=dm.gamma,
        c=dm.c,
        phi_bar=_phi_bar(dm.phi, dm.c, e_nominal),
        gamma_bar=gamma_bar,
        c_bar=c_bar,
        i_bar=i_bar,
        v1=block_diag(dm.w, v2),
        v12=v12,
        v2=v2,
    )


def initial_estimate(x0, p0):
    """Estimado inicial a partir de un vector de 12 o 15 componentes."""
    x0 = np.asarray(x0, dtype=float)
    x_hat = np.concatenate([x0, np.zeros(N_AUG - x0.size)])
    return AugmentedEstimate(x_hat=x_hat, p=as_spd(p0, name="P0"))


def kf_step(est, am, frame, u, r):
    """
    Un paso del predictor de Kalman con medición intermitente.

    Args:
        est (AugmentedEstimate): x̂_{k|k−1} y su covarianza.
        am (AugmentedModel): Modelo aumentado.
        frame (MeasurementFrame): y_k y la máscara Δ_k.
        u (ControlInput | numpy.ndarray): Entrada en desviación aplicada.
        r (array_like): Incremento de referencia aplicado al integrador.

    Returns:
        AugmentedEstimate: x̂_{k+1|k}, P_{k+1|k} y la ganancia usada.
    """
    uv = u.as_vector() if isinstance(u, ControlInput) else np.asarray(u, dtype=float)
    r = np.asarray(r, dtype=float)
    if not (np.all(np.isfinite(est.x_hat)) and np.all(np.isfinite(est.p))):
        raise ValueError("Estimado no finito")

    e = selection_matrix(frame.mask)
    delta = frame.mask.delta_matrix()
    phi_bar = am.phi_bar_for(e)
    e_bar = am.e_bar_for(e)
    h = delta @ am.c_bar
    p = est.p

    cross = phi_bar @ p @ h.T + e_bar @ am.v12
    s = h @ p @ h.T + am.v2
    try:
        factor = cho_factor(symmetrize(s))
    except LinAlgError as exc:
        raise SingularInnovationError(str(exc)) from exc
    k = cho_solve(factor, cross.T).T

    p_next = phi_bar @ p @ phi_bar.T + e_bar @ am.v1 @ e_bar.T - k @ cross.T
    innovation = delta @ frame.y - h @ est.x_hat
    x_next = phi_bar @ est.x_hat + am.gamma_bar @ uv + am.i_bar @ r + k @ innovation
    return AugmentedEstimate(x_hat=x_next, p=symmetrize(p_next), gain=k)
