"""
Motor de simulación de lazo cerrado: trayectoria de referencia,
integración RK4 de la planta no lineal, corrida individual, lote Monte
Carlo y exportación CSV.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from quadsim.controller import (
    OUTAGE_POLICIES,
    IntegratorState,
    LqWeights,
    compute_gain,
    control_law,
    equilibrium_integrator,
    integral_update,
    reference_increment,
)
from quadsim.estimator import N_AUG, build_augmented, initial_estimate, kf_step, selection_matrix
from quadsim.exceptions import DivergenceError, ExportError
from quadsim.metrics import MseReport, mse_metrics
from quadsim.model import (
    N_OUTPUTS,
    N_STATES,
    PlantState,
    QuadrotorParams,
    build_discrete_model,
    deviation_input,
    nonlinear_derivative,
    plant_input,
)
from quadsim.numerics import as_spd, sample_mvn
from quadsim.sensors import (
    AnchorSet,
    AvailabilityMask,
    DropoutConfig,
    LandmarkSet,
    assemble_frame,
    availability_step,
    default_anchors,
    default_landmarks,
    sense_imu,
    sense_uwb,
    sense_yolo,
)

logger = logging.getLogger(__name__)

SENSOR_SETS = ("imu+uwb", "imu+uwb+yolo")
STREAMS = ("process", "uwb", "yolo", "imu", "availability")
CSV_HEADER = ["Desired X", "Desired Y", "Actual X", "Actual Y", "Est X", "Est Y", "Mask UWB", "Mask YOLO", "Mask IMU"]


@dataclass(frozen=True)
class Trajectory:
    """Waypoints planos (x, y) recorridos a rapidez constante y altitud fija."""

    waypoints: np.ndarray
    speed: float = 0.35
    altitude: float = 1.0

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float)
        if wp.ndim != 2 or wp.shape[1] != 2 or wp.shape[0] < 2:
            raise ValueError(f"Se requieren al menos 2 waypoints (x, y), forma {wp.shape}")
        if not np.all(np.isfinite(wp)) or not np.isfinite(self.speed) or self.speed < 0:
            raise ValueError("Waypoints o rapidez inválidos")
        object.__setattr__(self, "waypoints", wp)

    def reference(self, t):
        return generate_trajectory(self.waypoints, self.speed, t, self.altitude)


def default_trajectory():
    """Curva en S: y = 3·sin(πx/10) para x de 0 a 20 m."""
    x = np.linspace(0.0, 20.0, 21)
    return Trajectory(np.column_stack([x, 3.0 * np.sin(np.pi * x / 10.0)]))


def generate_trajectory(waypoints, speed, t, altitude=1.0):
    """
    Referencia r_k interpolada linealmente a lo largo de los waypoints.

    Args:
        waypoints (array_like): Puntos (x, y), al menos 2.
        speed (float): Rapidez de avance en m/s.
        t (float): Tiempo en s; fuera de rango se recorta a los extremos.
        altitude (float, optional): Altura constante z.

    Returns:
        numpy.ndarray: Referencia [x, y, z].
    """
    wp = np.asarray(waypoints, dtype=float)
    seg = np.linalg.norm(np.diff(wp, axis=0), axis=1)
    # Descartar segmentos de largo cero para que la abscisa sea creciente
    keep = np.concatenate([[True], seg > 0])
    wp, seg = wp[keep], seg[seg > 0]
    if seg.size == 0 or speed == 0:
        return np.array([wp[0, 0], wp[0, 1], altitude])
    s = np.concatenate([[0.0], np.cumsum(seg)])
    arc = np.clip(speed * max(t, 0.0), 0.0, s[-1])
    return np.array([np.interp(arc, s, wp[:, 0]), np.interp(arc, s, wp[:, 1]), altitude])


@dataclass(frozen=True)
class NoiseConfig:
    filter_w: np.ndarray = field(default_factory=lambda: np.eye(N_STATES))
    filter_v: np.ndarray = field(default_factory=lambda: np.diag([0.05] * 3 + [0.08] * 3 + [0.01] * 3))
    process_w: np.ndarray = field(default_factory=lambda: 1e-6 * np.eye(N_STATES))
    uwb_range_std: float = 0.365
    yolo_range_std: float = 0.45
    imu_var: float = 0.01

    def __post_init__(self):
        for nombre, dim in (("filter_w", N_STATES), ("filter_v", N_OUTPUTS), ("process_w", N_STATES)):
            m = as_spd(getattr(self, nombre), definite=(nombre == "filter_v"), name=nombre)
            if m.shape != (dim, dim):
                raise ValueError(f"'{nombre}' debe ser {dim}×{dim}, tiene forma {m.shape}")
            object.__setattr__(self, nombre, m)
        for nombre in ("uwb_range_std", "yolo_range_std", "imu_var"):
            if getattr(self, nombre) < 0:
                raise ValueError(f"'{nombre}' debe ser no negativo")


@dataclass(frozen=True)
class Scenario:
    params: QuadrotorParams = field(default_factory=QuadrotorParams)
    weights: LqWeights = field(default_factory=LqWeights.default)
    anchors: AnchorSet = field(default_factory=default_anchors)
    landmarks: LandmarkSet = field(default_factory=default_landmarks)
    dropout: DropoutConfig = field(default_factory=DropoutConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    trajectory: Trajectory = field(default_factory=default_trajectory)
    duration: float = 60.0
    seed: int = 0
    n_runs: int = 20
    sensor_set: str = "imu+uwb+yolo"
    name: str = "default"
    substeps: int = 1
    divergence_bound: float = 100.0
    initial_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    p0: float = 1.0
    outage_policy: str = "estimate"
    anti_windup: float | None = None
    windup_warn_steps: int = 100

    def __post_init__(self):
        if not np.isfinite(self.duration) or self.duration <= 0:
            raise ValueError(f"La duración debe ser positiva, se recibió {self.duration}")
        if self.sensor_set not in SENSOR_SETS:
            raise ValueError(f"Conjunto de sensores desconocido '{self.sensor_set}'. Opciones: {SENSOR_SETS}")
        if self.outage_policy not in OUTAGE_POLICIES:
            raise ValueError(f"Política de apagón desconocida '{self.outage_policy}'")
        if self.substeps < 1 or self.n_runs < 1:
            raise ValueError("substeps y n_runs deben ser ≥ 1")
        if self.anti_windup is not None and self.anti_windup <= 0:
            raise ValueError("El recorte anti-windup debe ser positivo")
        object.__setattr__(self, "initial_offset", np.asarray(self.initial_offset, dtype=float).reshape(3))

    @property
    def n_steps(self):
        return int(round(self.duration / self.params.h))

    @property
    def uses_yolo(self):
        return "yolo" in self.sensor_set

    def initial_covariance(self):
        """P₀: p0 en los estados físicos; los integradores son conocidos."""
        diag = np.zeros(N_AUG)
        diag[:N_STATES] = self.p0
        return np.diag(diag)


@dataclass(frozen=True)
class ClosedLoopDesign:
    model: object
    augmented: object
    gain: object


def build_design(sc):
    """Modelo discreto, modelo aumentado y ganancia L∞ de un escenario."""
    dm = build_discrete_model(sc.params, sc.noise.filter_w, sc.noise.filter_v)
    am = build_augmented(dm)
    return ClosedLoopDesign(model=dm, augmented=am, gain=compute_gain(am, sc.weights))


@dataclass
class RunLog:
    """Un registro por periodo de control; el estimado es x̂_{k|k−1}."""

    t: np.ndarray
    truth: np.ndarray
    estimate: np.ndarray
    p_diag: np.ndarray
    reference: np.ndarray
    control: np.ndarray
    mask: np.ndarray
    integrator: np.ndarray
    seed: object = None
    failed_step: int | None = None
    blackout: tuple | None = None

    @classmethod
    def empty(cls, n, blackout=None, seed=None):
        return cls(
            t=np.zeros(n),
            truth=np.zeros((n, N_STATES)),
            estimate=np.zeros((n, N_AUG)),
            p_diag=np.zeros((n, N_AUG)),
            reference=np.zeros((n, 3)),
            control=np.zeros((n, 4)),
            mask=np.zeros((n, 3), dtype=bool),
            integrator=np.zeros((n, 3)),
            seed=seed,
            blackout=blackout,
        )

    def __len__(self):
        return self.t.shape[0]

    @property
    def failed(self):
        return self.failed_step is not None

    def truncate(self, n):
        for nombre in ("t", "truth", "estimate", "p_diag", "reference", "control", "mask", "integrator"):
            setattr(self, nombre, getattr(self, nombre)[:n])

    def to_frame(self):
        """Bitácora como DataFrame, una fila por paso."""
        estados = ["x", "y", "z", "phi", "theta", "psi", "vx", "vy", "vz", "p", "q", "r"]
        df = pd.DataFrame(self.truth, columns=estados)
        df.insert(0, "t", self.t)
        for j, a in enumerate(("x", "y", "z")):
            df[f"est_{a}"] = self.estimate[:, j]
            df[f"ref_{a}"] = self.reference[:, j]
            df[f"i_{a}"] = self.integrator[:, j]
        for j, nombre in enumerate(("f_t", "tau_x", "tau_y", "tau_z")):
            df[nombre] = self.control[:, j]
        for j, sensor in enumerate(("uwb", "yolo", "imu")):
            df[f"mask_{sensor}"] = self.mask[:, j]
        return df


def rk4_step(s, u, p, h, substeps=1):
    """
    Integra la dinámica no lineal con Runge-Kutta clásico de 4º orden.

    Raises:
        DivergenceError: Si el resultado no es finito.
    """
    if not np.isfinite(h) or h <= 0:
        raise ValueError(f"El paso de integración debe ser positivo, se recibió {h}")
    x = s.as_vector()
    dt = h / substeps
    for _ in range(substeps):
        k1 = nonlinear_derivative(x, u, p)
        k2 = nonlinear_derivative(x + 0.5 * dt * k1, u, p)
        k3 = nonlinear_derivative(x + 0.5 * dt * k2, u, p)
        k4 = nonlinear_derivative(x + dt * k3, u, p)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x)):
        raise DivergenceError(detail="estado no finito tras RK4")
    return PlantState.from_vector(x)


def run_streams(seed):
    """Cinco generadores independientes de una semilla (entero o SeedSequence)."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return {
        nombre: np.random.default_rng(np.random.SeedSequence(ss.entropy, spawn_key=(*ss.spawn_key, j)))
        for j, nombre in enumerate(STREAMS)
    }


def simulate_run(sc, seed=None, design=None):
    """
    Una corrida de lazo cerrado.

    Orden por paso: referencia, disponibilidad, lecturas, trama, ley de
    control con x̂_{k|k−1}, entrada a la planta con recorte, paso del filtro
    con la desviación aplicada, actualización del integrador y propagación
    RK4 con ruido de proceso.

    Args:
        sc (Scenario): Escenario.
        seed (int | numpy.random.SeedSequence, optional): Semilla; por defecto sc.seed.
        design (ClosedLoopDesign, optional): Diseño precalculado.

    Returns:
        RunLog: Bitácora; `failed_step` indica divergencia.
    """
    seed = sc.seed if seed is None else seed
    design = design or build_design(sc)
    rng = run_streams(seed)
    p, noise = sc.params, sc.noise
    n = sc.n_steps

    r0 = sc.trajectory.reference(0.0)
    truth = PlantState.hover_at(r0 + sc.initial_offset)
    x0 = np.concatenate([r0, np.zeros(N_STATES - 3)])
    # Integrador sembrado con el sesgo que deja u = 0 en x̂₀
    i0 = equilibrium_integrator(design.gain, x0)
    est = initial_estimate(np.concatenate([x0, i0]), sc.initial_covariance())
    integ = IntegratorState(i0)
    log = RunLog.empty(n, blackout=sc.dropout.uwb_blackout, seed=seed)
    outage, warned = 0, False

    for k in range(n):
        t = k * p.h
        r = sc.trajectory.reference(t)

        drawn = availability_step(sc.dropout, truth, rng["availability"], sc.landmarks if sc.uses_yolo else None)
        # Las lecturas se generan siempre para mantener alineados los flujos
        uwb = sense_uwb(truth, sc.anchors, noise.uwb_range_std, rng["uwb"])
        yolo = sense_yolo(truth, sc.landmarks, noise.yolo_range_std, rng["yolo"])
        imu = sense_imu(truth, noise.imu_var, rng["imu"])
        mask = AvailabilityMask(
            uwb=drawn.uwb and uwb is not None,
            yolo=drawn.yolo and sc.uses_yolo and yolo is not None,
            imu=drawn.imu,
        )
        frame = assemble_frame(
            uwb if mask.uwb else None,
            yolo if mask.yolo else None,
            imu if mask.imu else None,
            mask,
        )

        u = plant_input(control_law(design.gain, est.physical, integ), p)
        e = selection_matrix(mask)
        p_hat = est.physical[:3].copy()

        log.t[k] = t
        log.truth[k] = truth.as_vector()
        log.estimate[k] = est.x_hat
        log.p_diag[k] = np.diag(est.p)
        log.reference[k] = r
        log.control[k] = u.as_vector()
        log.mask[k] = mask.as_tuple()
        log.integrator[k] = integ.i

        est = kf_step(
            est, design.augmented, frame, deviation_input(u, p), reference_increment(r, e, sc.outage_policy, p_hat)
        )
        center = equilibrium_integrator(design.gain, r) if sc.anti_windup is not None else None
        integ = integral_update(integ, r, frame, e, sc.outage_policy, sc.anti_windup, p_hat, center)

        if mask.has_position:
            outage, warned = 0, False
        else:
            outage += 1
            if outage >= sc.windup_warn_steps and not warned and sc.outage_policy == "accumulate":
                logger.warning(
                    "Sin posición durante %d pasos (t=%.2f s): el integrador acumula la referencia, |i|=%.3f",
                    outage,
                    t,
                    np.linalg.norm(integ.i),
                )
                warned = True

        try:
            nxt = rk4_step(truth, u, p, p.h, sc.substeps).as_vector()
            nxt = nxt + sample_mvn(np.zeros(N_STATES), noise.process_w, rng["process"])
            if not np.all(np.isfinite(nxt)) or np.linalg.norm(nxt[:3]) > sc.divergence_bound:
                raise DivergenceError(k, f"|posición| > {sc.divergence_bound} m")
        except DivergenceError as exc:
            logger.warning("Corrida %s abortada en el paso %d (t=%.2f s): %s", seed, k, t, exc)
            log.failed_step = k
            log.truncate(k + 1)
            break
        truth = PlantState.from_vector(nxt)

    return log


def _run_metrics(sc, run, seed, design):
    log = simulate_run(sc, seed, design)
    if log.failed:
        return run, None, log.failed_step
    return run, mse_metrics(log), None


def monte_carlo(sc, n_runs=None, n_jobs=1, progress=True):
    """
    Lote Monte Carlo con semillas hijas de la semilla del escenario.

    Dos escenarios con la misma semilla usan las mismas semillas por corrida.

    Args:
        sc (Scenario): Escenario.
        n_runs (int, optional): Corridas; por defecto sc.n_runs.
        n_jobs (int, optional): Procesos de joblib.
        progress (bool, optional): Mostrar barra de progreso.

    Returns:
        MseReport: Métricas por corrida y agregados.
    """
    n_runs = sc.n_runs if n_runs is None else n_runs
    if n_runs < 1:
        raise ValueError(f"n_runs debe ser ≥ 1, se recibió {n_runs}")
    design = build_design(sc)
    seeds = np.random.SeedSequence(sc.seed).spawn(n_runs)
    tareas = tqdm(list(enumerate(seeds)), desc=sc.name, disable=not progress)
    results = Parallel(n_jobs=n_jobs)(delayed(_run_metrics)(sc, run, s, design) for run, s in tareas)
    return MseReport.from_runs(results, label=sc.name)


def export_csv(log, path):
    """
    Escribe la bitácora con el encabezado de trayectoria deseada, real y estimada.

    Raises:
        ExportError: Si no se puede escribir el archivo.
    """
    df = pd.DataFrame(
        {
            "Desired X": log.reference[:, 0],
            "Desired Y": log.reference[:, 1],
            "Actual X": log.truth[:, 0],
            "Actual Y": log.truth[:, 1],
            "Est X": log.estimate[:, 0],
            "Est Y": log.estimate[:, 1],
            "Mask UWB": log.mask[:, 0].astype(int),
            "Mask YOLO": log.mask[:, 1].astype(int),
            "Mask IMU": log.mask[:, 2].astype(int),
        },
        columns=CSV_HEADER,
    )
    try:
        df.to_csv(path, index=False, float_format="%.17g")
    except OSError as exc:
        raise ExportError(path, exc) from exc
    return path
