import io

import streamlit as st

from quadsim.exceptions import NumericalError
from quadsim.filters import (
    apply_mask_filters,
    apply_range_filter,
    blackout_rows,
    create_mask_filter_widgets,
    create_time_filter_widget,
    summarize_availability,
)
from quadsim.harness import export_csv
from quadsim.metrics import mse_metrics
from quadsim.ui import CSS, corrida_cacheada, crear_metrica_html, selector_escenario

st.set_page_config(page_title="Simulación - Cuadricóptero", page_icon="🛰️", layout="wide")
st.markdown(CSS, unsafe_allow_html=True)


def main():
    st.markdown('<h1 class="main-header">Corrida Individual</h1>', unsafe_allow_html=True)

    ruta, sc = selector_escenario(key="escenario_sim")
    if sc is None:
        st.error("No se pudo cargar el escenario.")
        return
    seed = int(st.sidebar.number_input("Semilla", min_value=0, value=int(sc.seed), step=1))

    try:
        with st.spinner("Simulando..."):
            log = corrida_cacheada(ruta, seed)
    except NumericalError as e:
        st.error(f"Fallo numérico: {e}")
        return

    if log.failed:
        st.sidebar.error(f"La corrida divergió en el paso {log.failed_step}")
    else:
        st.sidebar.success(f"✅ {len(log)} pasos simulados")
    if len(log) == 0:
        st.warning("La bitácora está vacía.")
        return

    metricas = mse_metrics(log)
    st.markdown('<h2 class="sub-header">MSE de estimación (m²)</h2>', unsafe_allow_html=True)
    cols = st.columns(3)
    for col, eje in zip(cols, ("x", "y", "z")):
        with col:
            st.markdown(crear_metrica_html(f"Eje {eje}", metricas[f"est_{eje}"], umbral_bueno=0.01, umbral_medio=0.1), unsafe_allow_html=True)

    st.markdown('<h2 class="sub-header">MSE de seguimiento (m²)</h2>', unsafe_allow_html=True)
    cols = st.columns(3)
    for col, (nombre, clave) in zip(cols, (("Planar xy", "path_xy"), ("3D", "path"), ("Eje z", "path_z"))):
        with col:
            st.markdown(crear_metrica_html(nombre, metricas[clave], umbral_bueno=0.05, umbral_medio=0.25), unsafe_allow_html=True)

    if sc.dropout.uwb_blackout is not None:
        st.markdown('<h2 class="sub-header">Durante el apagón UWB (m²)</h2>', unsafe_allow_html=True)
        cols = st.columns(3)
        for col, eje in zip(cols, ("x", "y", "z")):
            with col:
                st.markdown(crear_metrica_html(f"Eje {eje}", metricas[f"est_{eje}_blackout"]), unsafe_allow_html=True)

    # Filtros de la bitácora
    st.sidebar.title("Filtros")
    df = log.to_frame()
    selecciones = create_mask_filter_widgets(key_prefix="sim")
    t_min, t_max = create_time_filter_widget(df, key_prefix="sim")
    filtrado = apply_range_filter(apply_mask_filters(df, selecciones), "t", t_min, t_max)
    if sc.dropout.uwb_blackout is not None and st.sidebar.checkbox("Solo pasos en el apagón UWB", key="sim_apagon"):
        filtrado = blackout_rows(filtrado, sc.dropout.uwb_blackout)

    st.markdown('<h2 class="sub-header">Disponibilidad de sensores</h2>', unsafe_allow_html=True)
    st.dataframe(summarize_availability(df).rename("fracción de pasos").to_frame(), use_container_width=True)

    st.markdown('<h2 class="sub-header">Bitácora</h2>', unsafe_allow_html=True)
    st.caption(f"{len(filtrado)} de {len(df)} pasos")
    st.dataframe(filtrado, hide_index=True, use_container_width=True)

    buffer = io.StringIO()
    export_csv(log, buffer)
    st.download_button("Descargar CSV", buffer.getvalue(), file_name=f"run_{sc.name}_{seed}.csv", mime="text/csv")


if __name__ == "__main__":
    main()
