import numpy as np
import pandas as pd
import streamlit as st

MASK_COLUMNS = {"UWB": "mask_uwb", "YOLO": "mask_yolo", "IMU": "mask_imu"}


def apply_range_filter(df, column, min_val=None, max_val=None):
    """
    Aplica filtros de rango al DataFrame.

    Args:
        df (pandas.DataFrame): DataFrame a filtrar.
        column (str): Nombre de la columna a filtrar.
        min_val (numeric, optional): Valor mínimo a incluir.
        max_val (numeric, optional): Valor máximo a incluir.

    Returns:
        pandas.DataFrame: DataFrame filtrado por rango.
    """
    # Verificar que la columna existe
    if column not in df.columns or df.empty:
        return df

    if min_val is not None:
        df = df[df[column] >= min_val]
    if max_val is not None:
        df = df[df[column] <= max_val]
    return df


def apply_boolean_filter(df, column, value=None):
    """
    Aplica filtros booleanos al DataFrame.

    Args:
        df (pandas.DataFrame): DataFrame a filtrar.
        column (str): Nombre de la columna a filtrar.
        value (bool, optional): Valor a filtrar (True, False o None para ambos).

    Returns:
        pandas.DataFrame: DataFrame filtrado por valor booleano.
    """
    if column not in df.columns or df.empty or value is None:
        return df
    return df[df[column] == value]


def blackout_mask(x, interval):
    """Máscara de los pasos cuya x verdadera cae en el intervalo de apagón UWB."""
    x = np.asarray(x, dtype=float)
    if interval is None:
        return np.zeros(x.shape, dtype=bool)
    lo, hi = interval
    return (x >= lo) & (x <= hi)


def blackout_rows(df, interval, column="x"):
    """Filas de una bitácora dentro del apagón; vacío si no hay apagón configurado."""
    if interval is None:
        return df.iloc[0:0]
    return apply_range_filter(df, column, *interval)


def apply_mask_filters(df, selections):
    """
    Filtra la bitácora por disponibilidad de sensores.

    Args:
        df (pandas.DataFrame): Bitácora de una corrida (RunLog.to_frame()).
        selections (dict): Sensor ("UWB", "YOLO", "IMU") a True, False o None.

    Returns:
        pandas.DataFrame: Filas que cumplen todas las selecciones.
    """
    for sensor, value in selections.items():
        df = apply_boolean_filter(df, MASK_COLUMNS[sensor], value)
    return df


def create_mask_filter_widgets(key_prefix="mask"):
    """
    Crea los selectores de disponibilidad por sensor en la barra lateral.

    Returns:
        dict: Sensor a True, False o None ("Todos").
    """
    opciones = {"Todos": None, "Disponible": True, "No disponible": False}
    selections = {}
    for sensor in MASK_COLUMNS:
        choice = st.sidebar.selectbox(f"{sensor}", list(opciones), key=f"{key_prefix}_{sensor}")
        selections[sensor] = opciones[choice]
    return selections


def create_time_filter_widget(df, key_prefix="time"):
    """Deslizador del intervalo de tiempo simulado; devuelve (t_min, t_max)."""
    if "t" not in df.columns or df.empty:
        return None, None
    t_min, t_max = float(df["t"].min()), float(df["t"].max())
    if t_min == t_max:
        return t_min, t_max
    return st.sidebar.slider(
        "Intervalo de tiempo (s)", min_value=t_min, max_value=t_max, value=(t_min, t_max), key=f"{key_prefix}_range"
    )


def summarize_availability(df):
    """Fracción de pasos con cada sensor disponible."""
    if df.empty:
        return pd.Series({sensor: np.nan for sensor in MASK_COLUMNS})
    return pd.Series({sensor: float(df[col].mean()) for sensor, col in MASK_COLUMNS.items()})
