"""
Generación sintética de mediciones IMU, UWB y del sustituto de YOLO,
procesos de disponibilidad y empaquetado de la trama de medición.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from quadsim.exceptions import DegenerateGeometryError
from quadsim.model import N_OUTPUTS, wrap_angle

logger = logging.getLogger(__name__)

RANK_TOL = 1e-9
DIST_EPS = 1e-12

# Bloques de y: UWB, YOLO, IMU
BLOCKS = (slice(0, 3), slice(3, 6), slice(6, 9))
SENSOR_NAMES = ("uwb", "yolo", "imu")


def _as_points(points, name):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"'{name}' debe ser una lista de posiciones 3D, forma {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"'{name}' contiene valores no finitos")
    return arr


def _check_distinct(points, name):
    diff = points[:, None, :] - points[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    np.fill_diagonal(dist, np.inf)
    if np.min(dist) <= DIST_EPS:
        raise ValueError(f"Las posiciones de '{name}' deben ser distintas")


@dataclass(frozen=True)
class AnchorSet:
    """Anclas UWB en posiciones conocidas del marco {E}."""

    anchors: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.anchors, "anchors")
        if pts.shape[0] < 4:
            raise ValueError(f"Se requieren al menos 4 anclas, se recibieron {pts.shape[0]}")
        _check_distinct(pts, "anchors")
        if np.linalg.matrix_rank(pts[1:] - pts[0], tol=1e-9 * max(np.ptp(pts), 1.0)) < 3:
            raise ValueError("Las anclas son coplanares")
        object.__setattr__(self, "anchors", pts)

    def __len__(self):
        return self.anchors.shape[0]


@dataclass(frozen=True)
class LandmarkSet:
    """Puntos de referencia visuales y el cono de visión horizontal alineado con la guiñada."""

    landmarks: np.ndarray
    max_range: float = 10.0
    half_angle: float = np.deg2rad(60.0)

    def __post_init__(self):
        pts = _as_points(self.landmarks, "landmarks")
        if pts.shape[0] < 3:
            raise ValueError(f"Se requieren al menos 3 landmarks, se recibieron {pts.shape[0]}")
        if not np.isfinite(self.max_range) or self.max_range <= 0:
            raise ValueError(f"El alcance debe ser positivo, se recibió {self.max_range}")
        if not (0.0 < self.half_angle <= np.pi):
            raise ValueError(f"El semiángulo debe estar en (0, π], se recibió {self.half_angle}")
        object.__setattr__(self, "landmarks", pts)

    def __len__(self):
        return self.landmarks.shape[0]


@dataclass(frozen=True)
class AvailabilityMask:
    uwb: bool = True
    yolo: bool = True
    imu: bool = True

    def __post_init__(self):
        for nombre in SENSOR_NAMES:
            object.__setattr__(self, nombre, bool(getattr(self, nombre)))

    @classmethod
    def from_tuple(cls, delta):
        return cls(*delta)

    def as_tuple(self):
        return (self.uwb, self.yolo, self.imu)

    def delta_matrix(self):
        """Δ_k: diagonal 9×9 con los bloques disponibles en identidad."""
        d = np.zeros(N_OUTPUTS)
        for bloque, activo in zip(BLOCKS, self.as_tuple()):
            d[bloque] = float(activo)
        return np.diag(d)

    @property
    def has_position(self):
        return self.uwb or self.yolo


@dataclass(frozen=True)
class MeasurementFrame:
    y: np.ndarray
    mask: AvailabilityMask = field(default_factory=AvailabilityMask)


@dataclass(frozen=True)
class DropoutConfig:
    p_uwb: float = 0.9
    p_yolo: float = 0.7
    p_imu: float = 1.0
    uwb_blackout: tuple | None = None

    def __post_init__(self):
        for nombre in ("p_uwb", "p_yolo", "p_imu"):
            valor = getattr(self, nombre)
            if not (0.0 <= valor <= 1.0):
                raise ValueError(f"La probabilidad '{nombre}' debe estar en [0, 1], se recibió {valor}")
        if self.uwb_blackout is not None:
            lo, hi = (float(v) for v in self.uwb_blackout)
            if not lo <= hi:
                raise ValueError(f"Intervalo de apagón desordenado: {self.uwb_blackout}")
            object.__setattr__(self, "uwb_blackout", (lo, hi))

    @property
    def probabilities(self):
        return np.array([self.p_uwb, self.p_yolo, self.p_imu])

    def in_blackout(self, x):
        if self.uwb_blackout is None:
            return False
        lo, hi = self.uwb_blackout
        return lo <= x <= hi


def default_anchors():
    """
    Ocho anclas en los vértices de un cubo de 30 m centrado en el punto medio
    de la curva por defecto, (10, 0, 1).

    Desde cualquier punto de la curva las anclas rodean a la etiqueta en los
    tres ejes y la varianza por eje queda casi igual: σ²/2.7 en los extremos
    y 3σ²/8 en el centro.
    """
    half = 15.0
    center = np.array([10.0, 0.0, 1.0])
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    return AnchorSet(center + half * signs)


def default_landmarks():
    """
    Pórticos cada 4 m en x, de x = 2 a x = 30, con cuatro landmarks a
    y = ±4 m y a ±4 m de la altitud de vuelo (z = −3 y z = 5).

    Con 12 m de alcance y el cono de ±60° hay al menos cuatro visibles a lo
    largo de la curva por defecto.
    """
    pts = [[x, y, z] for x in np.arange(2.0, 31.0, 4.0) for y in (-4.0, 4.0) for z in (-3.0, 5.0)]
    return LandmarkSet(np.array(pts), max_range=12.0)


def visible_landmarks(position, yaw, l):
    """
    Máscara booleana de los landmarks visibles desde la cámara.

    Un landmark es visible si está dentro del alcance y su azimut relativo a
    la guiñada cae dentro del semiángulo del cono.
    """
    rel = l.landmarks - np.asarray(position, dtype=float)
    dist = np.linalg.norm(rel, axis=1)
    azimuth = wrap_angle(np.arctan2(rel[:, 1], rel[:, 0]) - yaw)
    return (dist > DIST_EPS) & (dist <= l.max_range) & (np.abs(azimuth) <= l.half_angle)


def availability_step(cfg, truth, rng, landmarks=None):
    """
    Sorteo de disponibilidad de los tres sensores para un paso.

    Siempre consume tres uniformes del flujo para que la secuencia no dependa
    del resultado del paso.

    Args:
        cfg (DropoutConfig): Probabilidades y apagón UWB.
        truth (PlantState): Estado verdadero.
        rng (numpy.random.Generator): Flujo de disponibilidad.
        landmarks (LandmarkSet, optional): Si se entrega, δ² se anula con menos de 3 visibles.

    Returns:
        AvailabilityMask: Máscara del paso.
    """
    delta = rng.random(3) < cfg.probabilities
    if cfg.in_blackout(truth.xi[0]):
        delta[0] = False
    if landmarks is not None and np.count_nonzero(visible_landmarks(truth.xi, truth.eta[2], landmarks)) < 3:
        delta[1] = False
    return AvailabilityMask.from_tuple(delta)


def sense_imu(truth, noise_var, rng):
    if noise_var < 0:
        raise ValueError(f"La varianza del IMU debe ser no negativa, se recibió {noise_var}")
    return truth.eta + np.sqrt(noise_var) * rng.standard_normal(3)


def uwb_ranges(tag, a, noise_std, rng):
    """Distancias etiqueta-ancla con ruido gaussiano, recortadas a ≥ 0."""
    tag = np.asarray(tag, dtype=float)
    if tag.shape != (3,) or not np.all(np.isfinite(tag)):
        raise ValueError("La posición de la etiqueta debe ser un vector 3D finito")
    true_ranges = np.linalg.norm(a.anchors - tag, axis=1)
    return np.clip(true_ranges + noise_std * rng.standard_normal(len(a)), 0.0, None)


def _gauss_newton(x, points, ranges, steps):
    for _ in range(steps):
        diff = x - points
        dist = np.linalg.norm(diff, axis=1)
        ok = dist > DIST_EPS
        if np.count_nonzero(ok) < 3:
            break
        jac = diff[ok] / dist[ok, None]
        dx = np.linalg.lstsq(jac, ranges[ok] - dist[ok], rcond=None)[0]
        x = x + dx
    return x


def laterate(points, ranges, hint=None, refine_steps=1):
    """
    Núcleo de mínimos cuadrados para multilateración y trilateración.

    Resta la ecuación de la primera esfera a las demás para eliminar los
    términos cuadráticos y resuelve el sistema lineal resultante. Si el
    sistema tiene rango 2 (centros coplanares) y se entrega `hint`, la
    ambigüedad especular se resuelve eligiendo la solución más cercana.

    Args:
        points (numpy.ndarray): Centros de las esferas, n×3.
        ranges (numpy.ndarray): Radios medidos.
        hint (array_like, optional): Punto de referencia para resolver la ambigüedad.
        refine_steps (int, optional): Pasos de Gauss-Newton posteriores.

    Returns:
        numpy.ndarray: Posición estimada.

    Raises:
        DegenerateGeometryError: Si la geometría no determina la posición.
    """
    points = np.asarray(points, dtype=float)
    ranges = np.asarray(ranges, dtype=float)
    if points.shape[0] != ranges.shape[0]:
        raise ValueError("Cantidad de radios distinta a la de centros")
    if points.shape[0] < 3:
        raise DegenerateGeometryError(f"se requieren al menos 3 esferas, hay {points.shape[0]}")

    p0, r0 = points[0], ranges[0]
    a = 2.0 * (points[1:] - p0)
    b = r0**2 - ranges[1:] ** 2 + np.sum(points[1:] ** 2, axis=1) - np.sum(p0**2)
    _, sv, vt = np.linalg.svd(a)
    rank = int(np.count_nonzero(sv > RANK_TOL * sv[0])) if sv.size and sv[0] > 0 else 0

    if rank == 3:
        x = np.linalg.lstsq(a, b, rcond=None)[0]
    elif rank == 2 and hint is not None:
        x0 = np.linalg.pinv(a, rcond=RANK_TOL) @ b
        n = vt[-1]
        # ‖x0 + t·n − p0‖² = r0²
        half_b = n @ (x0 - p0)
        c = np.sum((x0 - p0) ** 2) - r0**2
        root = np.sqrt(max(half_b**2 - c, 0.0))
        candidatos = [x0 + (-half_b + root) * n, x0 + (-half_b - root) * n]
        hint = np.asarray(hint, dtype=float)
        x = min(candidatos, key=lambda cand: np.linalg.norm(cand - hint))
    else:
        raise DegenerateGeometryError(f"sistema de rango {rank}")

    return _gauss_newton(x, points, ranges, refine_steps)


def multilaterate(ranges, a, refine_steps=1):
    ranges = np.asarray(ranges, dtype=float)
    if ranges.shape != (len(a),) or len(a) < 4:
        raise ValueError(f"Se requieren {len(a)} (≥4) distancias, se recibieron {ranges.shape}")
    return laterate(a.anchors, ranges, refine_steps=refine_steps)


def sense_uwb(truth, a, noise_std, rng, refine_steps=3):
    """Posición UWB por multilateración, o None si la geometría es degenerada."""
    ranges = uwb_ranges(truth.xi, a, noise_std, rng)
    try:
        return multilaterate(ranges, a, refine_steps=refine_steps)
    except DegenerateGeometryError as exc:
        logger.debug("Multilateración UWB degenerada: %s", exc)
        return None


def sense_yolo(truth, l, noise_std, rng, refine_steps=3):
    """
    Posición por trilateración contra los landmarks visibles.

    Se sortea ruido para todos los landmarks en cada llamada aunque solo se
    usen los visibles.

    Returns:
        numpy.ndarray | None: Posición estimada, o None con menos de 3 visibles.
    """
    noise = noise_std * rng.standard_normal(len(l))
    visible = visible_landmarks(truth.xi, truth.eta[2], l)
    if np.count_nonzero(visible) < 3:
        return None
    pts = l.landmarks[visible]
    dist = np.clip(np.linalg.norm(pts - truth.xi, axis=1) + noise[visible], 0.0, None)
    try:
        return laterate(pts, dist, hint=truth.xi, refine_steps=refine_steps)
    except DegenerateGeometryError as exc:
        logger.debug("Trilateración YOLO degenerada: %s", exc)
        return None


def assemble_frame(uwb, yolo, imu, mask):
    """
    Empaqueta y_k en el orden [UWB, YOLO, IMU] con ceros en bloques ausentes.

    Raises:
        ValueError: Si la presencia de un argumento no coincide con la máscara.
    """
    y = np.zeros(N_OUTPUTS)
    for nombre, bloque, valor, activo in zip(SENSOR_NAMES, BLOCKS, (uwb, yolo, imu), mask.as_tuple()):
        if (valor is not None) != activo:
            raise ValueError(f"La lectura '{nombre}' no coincide con la máscara (δ={int(activo)})")
        if activo:
            y[bloque] = np.asarray(valor, dtype=float).reshape(3)
    return MeasurementFrame(y=y, mask=mask)
