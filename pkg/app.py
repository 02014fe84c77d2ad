import numpy as np
import pandas as pd
import streamlit as st

from quadsim.exceptions import NumericalError
from quadsim.numerics import dare_residual
from quadsim.ui import CSS, crear_metrica_html, diseno_cacheado, selector_escenario

# Configuración inicial
st.set_page_config(page_title="Simulador de Cuadricóptero", page_icon="🚁", layout="wide", initial_sidebar_state="expanded")
st.markdown(CSS, unsafe_allow_html=True)


def resumen_escenario(sc):
    """Tabla de parámetros principales del escenario."""
    filas = [
        ("Nombre", sc.name),
        ("Sensores", sc.sensor_set.upper()),
        ("Duración (s)", sc.duration),
        ("Periodo h (s)", sc.params.h),
        ("Masa (kg)", sc.params.m),
        ("Corridas Monte Carlo", sc.n_runs),
        ("Semilla", sc.seed),
        ("p(UWB), p(YOLO), p(IMU)", f"{sc.dropout.p_uwb}, {sc.dropout.p_yolo}, {sc.dropout.p_imu}"),
        ("Apagón UWB en x (m)", sc.dropout.uwb_blackout or "sin apagón"),
        ("Política sin posición", sc.outage_policy),
        ("Anti-windup", sc.anti_windup or "desactivado"),
        ("Rapidez de referencia (m/s)", sc.trajectory.speed),
    ]
    return pd.DataFrame(filas, columns=["Parámetro", "Valor"]).astype({"Valor": str})


def main():
    st.markdown('<h1 class="main-header">Estimación de Pose y Control LQ-Servo de un Cuadricóptero</h1>', unsafe_allow_html=True)

    ruta, sc = selector_escenario()
    if sc is None:
        st.error("No se pudo cargar el escenario. Revise el archivo seleccionado.")
        return

    try:
        design = diseno_cacheado(ruta)
    except NumericalError as e:
        st.error(f"La síntesis de la ganancia falló: {e}")
        return
    st.sidebar.success("✅ Ganancia sintetizada")
    am, gain = design.augmented, design.gain
    residuo = dare_residual(am.phi_bar, am.gamma_bar, sc.weights.q_bar, sc.weights.r, gain.s)

    # KPIs principales
    st.markdown('<h2 class="sub-header">Diseño del Controlador</h2>', unsafe_allow_html=True)
    col1, col2, col3, col4 = st.columns(4)
    with col1:
        st.markdown(crear_metrica_html("Radio espectral", gain.spectral_radius, "ρ(Φ̄ − Γ̄L∞)", 0.999, 0.9999, "{:.6f}"), unsafe_allow_html=True)
    with col2:
        st.markdown(crear_metrica_html("Residuo DARE", residuo, "norma infinito", formato="{:.2e}"), unsafe_allow_html=True)
    with col3:
        st.markdown(crear_metrica_html("Anclas UWB", len(sc.anchors), formato="{:d}"), unsafe_allow_html=True)
    with col4:
        st.markdown(crear_metrica_html("Landmarks", len(sc.landmarks), formato="{:d}"), unsafe_allow_html=True)

    st.markdown('<h2 class="sub-header">Escenario</h2>', unsafe_allow_html=True)
    st.dataframe(resumen_escenario(sc), hide_index=True, use_container_width=True)

    st.markdown('<h2 class="sub-header">Ganancia L∞</h2>', unsafe_allow_html=True)
    estados = ["x", "y", "z", "φ", "θ", "ψ", "ẋ", "ẏ", "ż", "φ̇", "θ̇", "ψ̇", "iₓ", "i_y", "i_z"]
    entradas = ["δf_T", "τx", "τy", "τz"]
    st.dataframe(pd.DataFrame(np.round(gain.full, 4), index=entradas, columns=estados), use_container_width=True)

    st.markdown("""
    Utilice el **menú lateral izquierdo** para navegar entre las secciones:

    - **Inicio**: escenario, ganancia y estabilidad del lazo (esta página)
    - **Simulación**: una corrida con su bitácora filtrable y descarga CSV
    - **Monte Carlo**: comparación de escenarios con percentiles de MSE
    """)
    st.markdown('<div class="footer">quadsim v0.1</div>', unsafe_allow_html=True)


if __name__ == "__main__":
    main()
