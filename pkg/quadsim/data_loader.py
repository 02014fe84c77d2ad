import copy
import json
import logging
import os
from dataclasses import replace

import numpy as np
import pandas as pd
import streamlit as st

from quadsim.config import get_settings
from quadsim.controller import LqWeights
from quadsim.exceptions import ConfigError, ExportError
from quadsim.harness import CSV_HEADER, NoiseConfig, Scenario, Trajectory, default_trajectory
from quadsim.metrics import path_mse_xy
from quadsim.model import N_OUTPUTS, N_STATES, QuadrotorParams
from quadsim.sensors import AnchorSet, DropoutConfig, LandmarkSet, default_anchors, default_landmarks

logger = logging.getLogger(__name__)

LOCAL_SCENARIO_FILE = "scenario.json"


def default_scenario_dict():
    """Documento de escenario con todos los valores por defecto."""
    landmarks = default_landmarks()
    noise = NoiseConfig()
    return {
        "name": "default",
        "seed": 0,
        "n_runs": 20,
        "duration": 60.0,
        "sensor_set": "imu+uwb+yolo",
        "params": {"m": 2.5, "g": 9.81, "ix": 0.045, "iy": 0.045, "iz": 0.09, "h": 0.01, "f_max": None},
        "weights": {"preset": "default"},
        "anchors": default_anchors().anchors.tolist(),
        "landmarks": {
            "positions": landmarks.landmarks.tolist(),
            "max_range": landmarks.max_range,
            "half_angle_deg": float(np.rad2deg(landmarks.half_angle)),
        },
        "dropout": {"p_uwb": 0.9, "p_yolo": 0.7, "p_imu": 1.0, "uwb_blackout": None},
        "noise": {
            "filter_w": 1.0,
            "filter_v": np.diag(noise.filter_v).tolist(),
            "process_w": 1e-6,
            "uwb_range_std": noise.uwb_range_std,
            "yolo_range_std": noise.yolo_range_std,
            "imu_var": noise.imu_var,
        },
        "trajectory": {"preset": "s_curve", "speed": 0.35, "altitude": 1.0},
        "substeps": 1,
        "divergence_bound": 100.0,
        "initial_offset": [0.0, 0.0, 0.0],
        "p0": 1.0,
        "outage_policy": "estimate",
        "anti_windup": None,
        "windup_warn_steps": 100,
    }


def deep_merge(base, override):
    """Mezcla recursiva: los valores de `override` reemplazan a los de `base`."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _matrix(value, dim, name):
    """Escalar → escalar·I; lista de dim → diagonal; lista de listas → matriz completa."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(dim)
    if arr.shape == (dim,):
        return np.diag(arr)
    if arr.shape == (dim, dim):
        return arr
    raise ConfigError(f"'{name}' debe ser escalar, lista de {dim} o matriz {dim}×{dim}; forma {arr.shape}")


def _trajectory(doc):
    speed = doc.get("speed", 0.35)
    altitude = doc.get("altitude", 1.0)
    if "waypoints" in doc:
        return Trajectory(np.asarray(doc["waypoints"], dtype=float), speed, altitude)
    if doc.get("preset", "s_curve") != "s_curve":
        raise ConfigError(f"Trayectoria predefinida desconocida: '{doc.get('preset')}'")
    return Trajectory(default_trajectory().waypoints, speed, altitude)


def _weights(doc):
    if "q_bar" in doc or "r" in doc:
        base = LqWeights.preset(doc.get("preset", "default"))
        q_bar = _matrix(doc["q_bar"], N_STATES + 3, "weights.q_bar") if "q_bar" in doc else base.q_bar
        r = _matrix(doc["r"], 4, "weights.r") if "r" in doc else base.r
        return LqWeights(q_bar, r)
    return LqWeights.preset(doc.get("preset", "default"))


def scenario_from_dict(doc):
    """
    Construye un Scenario a partir de un documento parcial.

    Las claves ausentes toman los valores por defecto.

    Args:
        doc (dict): Documento JSON ya decodificado.

    Returns:
        Scenario: Escenario validado.

    Raises:
        ConfigError: Si algún valor es inválido.
    """
    if not isinstance(doc, dict):
        raise ConfigError("El escenario debe ser un objeto JSON")
    d = deep_merge(default_scenario_dict(), doc)
    try:
        lm = d["landmarks"]
        noise = d["noise"]
        blackout = d["dropout"].get("uwb_blackout")
        return Scenario(
            params=QuadrotorParams(**d["params"]),
            weights=_weights(d["weights"]),
            anchors=AnchorSet(np.asarray(d["anchors"], dtype=float)),
            landmarks=LandmarkSet(
                np.asarray(lm["positions"], dtype=float),
                max_range=float(lm["max_range"]),
                half_angle=float(np.deg2rad(lm["half_angle_deg"])),
            ),
            dropout=DropoutConfig(
                p_uwb=float(d["dropout"]["p_uwb"]),
                p_yolo=float(d["dropout"]["p_yolo"]),
                p_imu=float(d["dropout"]["p_imu"]),
                uwb_blackout=tuple(blackout) if blackout is not None else None,
            ),
            noise=NoiseConfig(
                filter_w=_matrix(noise["filter_w"], N_STATES, "noise.filter_w"),
                filter_v=_matrix(noise["filter_v"], N_OUTPUTS, "noise.filter_v"),
                process_w=_matrix(noise["process_w"], N_STATES, "noise.process_w"),
                uwb_range_std=float(noise["uwb_range_std"]),
                yolo_range_std=float(noise["yolo_range_std"]),
                imu_var=float(noise["imu_var"]),
            ),
            trajectory=_trajectory(d["trajectory"]),
            duration=float(d["duration"]),
            seed=int(d["seed"]),
            n_runs=int(d["n_runs"]),
            sensor_set=str(d["sensor_set"]),
            name=str(d["name"]),
            substeps=int(d["substeps"]),
            divergence_bound=float(d["divergence_bound"]),
            initial_offset=np.asarray(d["initial_offset"], dtype=float),
            p0=float(d["p0"]),
            outage_policy=str(d["outage_policy"]),
            anti_windup=None if d["anti_windup"] is None else float(d["anti_windup"]),
            windup_warn_steps=int(d["windup_warn_steps"]),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"Escenario inválido: {exc}") from exc


def _read_scenario_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"No se pudo leer el escenario '{path}': {exc}") from exc
    return scenario_from_dict(doc)


def load_scenario(path=None, seed=None):
    """
    Carga un escenario probando las fuentes en orden de prioridad:
    1. Argumento path (un fallo aquí es un ConfigError).
    2. Variable de entorno QUADSIM_SCENARIO.
    3. Archivo local 'scenario.json'.
    4. Valores por defecto.

    Args:
        path (str, optional): Ruta explícita a un documento JSON.
        seed (int, optional): Reemplaza la semilla del escenario.

    Returns:
        tuple: (Scenario, descripción de la fuente usada).
    """
    scenario, source = None, None

    # 1. Ruta explícita
    if path:
        scenario, source = _read_scenario_file(path), f"archivo ({path})"

    # 2. Variable de entorno
    env_path = get_settings().scenario_path
    if scenario is None and env_path:
        try:
            scenario, source = _read_scenario_file(env_path), f"QUADSIM_SCENARIO ({env_path})"
        except ConfigError as exc:
            logger.warning("Escenario de entorno ignorado: %s", exc)

    # 3. Archivo local
    if scenario is None and os.path.exists(LOCAL_SCENARIO_FILE):
        try:
            scenario, source = _read_scenario_file(LOCAL_SCENARIO_FILE), f"archivo local ({LOCAL_SCENARIO_FILE})"
        except ConfigError as exc:
            logger.warning("Escenario local ignorado: %s", exc)

    # 4. Valores por defecto
    if scenario is None:
        scenario, source = Scenario(), "valores por defecto"

    if seed is not None:
        scenario = replace(scenario, seed=int(seed))
    logger.info("Escenario '%s' cargado desde %s", scenario.name, source)
    return scenario, source


@st.cache_data(ttl=600)
def cargar_escenario(path=None):
    """Versión cacheada para el dashboard; reporta la fuente en la barra lateral."""
    try:
        scenario, source = load_scenario(path)
    except ConfigError as exc:
        st.sidebar.error(f"⚠️ {exc}")
        return None
    st.sidebar.info(f"Escenario '{scenario.name}' desde {source}")
    return scenario


def load_run_csv(path):
    """
    Lee una bitácora exportada con export_csv.

    Returns:
        pandas.DataFrame: Columnas del encabezado de exportación.

    Raises:
        ExportError: Si el archivo no se puede leer.
        ValueError: Si el encabezado no coincide.
    """
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except OSError as exc:
        raise ExportError(path, exc) from exc
    if list(df.columns) != CSV_HEADER:
        raise ValueError(f"Encabezado inesperado en '{path}': {list(df.columns)}")
    return df


def csv_path_mse(df):
    """MSE planar de seguimiento de una bitácora re-importada."""
    return path_mse_xy(df[["Desired X", "Desired Y"]].to_numpy(), df[["Actual X", "Actual Y"]].to_numpy())
