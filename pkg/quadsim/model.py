"""
Física del cuadricóptero: dinámica no lineal de Newton-Euler, equilibrio de
vuelo estacionario, linealización de ángulos pequeños y modelo discreto de
diseño.

Convenciones: marco mundial {E} ENU, marco del cuerpo {B} FLU. El vector de
estado es [x y z φ θ ψ ẋ ẏ ż φ̇ θ̇ ψ̇] y el de control [f_T τx τy τz].
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from quadsim.numerics import as_spd, discretize_zoh

logger = logging.getLogger(__name__)

N_STATES = 12
N_INPUTS = 4
N_OUTPUTS = 9

# Índices dentro del vector de estado
POS = slice(0, 3)
ATT = slice(3, 6)
VEL = slice(6, 9)
RATE = slice(9, 12)


def wrap_angle(a):
    """Envuelve ángulos a (−π, π]."""
    wrapped = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


@dataclass(frozen=True)
class QuadrotorParams:
    m: float = 2.5
    g: float = 9.81
    ix: float = 0.045
    iy: float = 0.045
    iz: float = 0.09
    h: float = 0.01
    f_max: float | None = None

    def __post_init__(self):
        for nombre in ("m", "g", "ix", "iy", "iz", "h"):
            valor = getattr(self, nombre)
            if not np.isfinite(valor) or valor <= 0:
                raise ValueError(f"El parámetro '{nombre}' debe ser positivo, se recibió {valor}")
        if self.f_max is not None and (not np.isfinite(self.f_max) or self.f_max <= 0):
            raise ValueError(f"f_max debe ser positivo, se recibió {self.f_max}")

    @property
    def hover_thrust(self):
        return self.m * self.g

    @property
    def thrust_limit(self):
        return self.f_max if self.f_max is not None else 2.0 * self.m * self.g


@dataclass(frozen=True)
class PlantState:
    """Estado verdadero: posición, actitud, velocidad y velocidad angular."""

    xi: np.ndarray = field(default_factory=lambda: np.zeros(3))
    eta: np.ndarray = field(default_factory=lambda: np.zeros(3))
    xi_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    eta_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for nombre in ("xi", "eta", "xi_dot", "eta_dot"):
            arr = np.asarray(getattr(self, nombre), dtype=float).reshape(3)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"Estado no finito en '{nombre}'")
            object.__setattr__(self, nombre, arr)
        object.__setattr__(self, "eta", wrap_angle(self.eta))

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[POS], x[ATT], x[VEL], x[RATE])

    @classmethod
    def hover_at(cls, position):
        return cls(xi=np.asarray(position, dtype=float))

    def as_vector(self):
        return np.concatenate([self.xi, self.eta, self.xi_dot, self.eta_dot])


@dataclass(frozen=True)
class ControlInput:
    """Empuje total y torques del cuerpo. Puede ser absoluto o una desviación."""

    f_t: float = 0.0
    tau: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float).reshape(3)
        if not np.isfinite(self.f_t) or not np.all(np.isfinite(tau)):
            raise ValueError("Entrada de control no finita")
        object.__setattr__(self, "f_t", float(self.f_t))
        object.__setattr__(self, "tau", tau)

    @classmethod
    def from_vector(cls, u):
        u = np.asarray(u, dtype=float)
        return cls(u[0], u[1:4])

    def as_vector(self):
        return np.concatenate([[self.f_t], self.tau])


@dataclass(frozen=True)
class DiscreteModel:
    phi: np.ndarray
    gamma: np.ndarray
    c: np.ndarray
    w: np.ndarray
    v: np.ndarray
    h: float


def nonlinear_derivative(s, u, p):
    """
    Derivada temporal del estado según las ecuaciones de Newton-Euler.

    Args:
        s (PlantState | numpy.ndarray): Estado (o su vector de 12 componentes).
        u (ControlInput | numpy.ndarray): Entrada absoluta [f_T, τx, τy, τz].
        p (QuadrotorParams): Parámetros físicos.

    Returns:
        numpy.ndarray: Derivada de 12 componentes.
    """
    x = s.as_vector() if isinstance(s, PlantState) else np.asarray(s, dtype=float)
    uv = u.as_vector() if isinstance(u, ControlInput) else np.asarray(u, dtype=float)
    phi, theta, psi = x[3], x[4], x[5]
    p_rate, q_rate, r_rate = x[9], x[10], x[11]
    f_t, tau_x, tau_y, tau_z = uv

    cphi, sphi = np.cos(phi), np.sin(phi)
    cth, sth = np.cos(theta), np.sin(theta)
    cpsi, spsi = np.cos(psi), np.sin(psi)
    a = f_t / p.m

    dx = np.empty(N_STATES)
    dx[0:3] = x[6:9]
    dx[3:6] = x[9:12]
    dx[6] = a * (cphi * sth * cpsi + spsi * sphi)
    dx[7] = a * (cphi * sth * spsi - cpsi * sphi)
    dx[8] = a * (cphi * cth) - p.g
    dx[9] = (p.iy - p.iz) / p.ix * q_rate * r_rate + tau_x / p.ix
    dx[10] = (p.iz - p.ix) / p.iy * p_rate * r_rate + tau_y / p.iy
    dx[11] = (p.ix - p.iy) / p.iz * p_rate * q_rate + tau_z / p.iz
    return dx


def continuous_linear_matrices(p):
    """
    Matrices (A, B) de la linealización alrededor del vuelo estacionario.

    La entrada de empuje es la desviación respecto de m·g.

    Returns:
        tuple: (a 12×12, b 12×4).
    """
    a = np.zeros((N_STATES, N_STATES))
    a[0:3, 6:9] = np.eye(3)
    a[3:6, 9:12] = np.eye(3)
    a[6, 4] = p.g  # ẍ = gθ
    a[7, 3] = -p.g  # ÿ = −gφ

    b = np.zeros((N_STATES, N_INPUTS))
    b[8, 0] = 1.0 / p.m
    b[9, 1] = 1.0 / p.ix
    b[10, 2] = 1.0 / p.iy
    b[11, 3] = 1.0 / p.iz
    return a, b


def hover_input(p):
    """Entrada constante que mantiene el equilibrio: (m·g, 0, 0, 0)."""
    return ControlInput(p.hover_thrust, np.zeros(3))


def plant_input(u_dev, p):
    """
    Convierte una entrada en desviación a la entrada absoluta de la planta.

    Suma el empuje de equilibrio y recorta el empuje a [0, f_max].
    """
    uv = u_dev.as_vector() if isinstance(u_dev, ControlInput) else np.asarray(u_dev, dtype=float)
    f_t = float(np.clip(uv[0] + p.hover_thrust, 0.0, p.thrust_limit))
    return ControlInput(f_t, uv[1:4])


def deviation_input(u, p):
    """Vector de desviación [f_T − m·g, τ] de una entrada absoluta."""
    uv = u.as_vector()
    uv[0] -= p.hover_thrust
    return uv


def measurement_matrix():
    """C de 9×12 en el orden y = [UWB xyz, YOLO xyz, IMU φθψ]."""
    c = np.zeros((N_OUTPUTS, N_STATES))
    c[0:3, 0:3] = np.eye(3)
    c[3:6, 0:3] = np.eye(3)
    c[6:9, 3:6] = np.eye(3)
    return c


def build_discrete_model(p, w, v):
    """
    Construye el modelo discreto de diseño (Φ, Γ, C, W, V, h).

    Args:
        p (QuadrotorParams): Parámetros físicos, incluye el periodo h.
        w (array_like): Covarianza de proceso discreta 12×12.
        v (array_like): Covarianza de medición 9×9.

    Returns:
        DiscreteModel: Modelo para el estimador y el controlador.
    """
    w = as_spd(w, name="W")
    v = as_spd(v, name="V")
    if w.shape != (N_STATES, N_STATES) or v.shape != (N_OUTPUTS, N_OUTPUTS):
        raise ValueError(f"W debe ser 12×12 y V 9×9; se recibieron {w.shape} y {v.shape}")
    a, b = continuous_linear_matrices(p)
    phi, gamma = discretize_zoh(a, b, p.h)
    return DiscreteModel(phi=phi, gamma=gamma, c=measurement_matrix(), w=w, v=v, h=p.h)
