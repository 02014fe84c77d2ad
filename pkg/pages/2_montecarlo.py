from dataclasses import replace

import streamlit as st

from quadsim.config import get_settings
from quadsim.data_loader import cargar_escenario
from quadsim.exceptions import NumericalError
from quadsim.harness import monte_carlo
from quadsim.metrics import compare_reports, identificar_problemas
from quadsim.ui import CSS, crear_metrica_html, listar_escenarios

st.set_page_config(page_title="Monte Carlo - Cuadricóptero", page_icon="🎲", layout="wide")
st.markdown(CSS, unsafe_allow_html=True)

COLUMNAS_TABLA = ["est_x", "est_y", "est_z", "path_xy", "path", "est_x_blackout"]


@st.cache_data(ttl=600, show_spinner=False)
def lote_cacheado(ruta, n_runs, seed):
    sc = replace(cargar_escenario(ruta), seed=seed)
    return monte_carlo(sc, n_runs=n_runs, n_jobs=get_settings().n_jobs, progress=False)


def mostrar_reporte(report):
    st.markdown(f"**{report.label}**: {report.n_runs} corridas, {report.n_failed} fallidas")
    st.dataframe(report.summary[COLUMNAS_TABLA].T, use_container_width=True)
    problemas, alertas = identificar_problemas(report)
    for p in problemas:
        st.error(f"{p['metrica']}: {p['valor']:.4g}")
    for a in alertas:
        st.warning(f"{a['metrica']}: {a['valor']:.4g}")


def main():
    st.markdown('<h1 class="main-header">Comparación Monte Carlo</h1>', unsafe_allow_html=True)

    rutas = listar_escenarios()
    if len(rutas) < 2:
        st.error("Se necesitan al menos dos escenarios en 'scenarios/'.")
        return
    base = st.sidebar.selectbox("Escenario base", rutas, index=rutas.index("scenarios/scenario1.json") if "scenarios/scenario1.json" in rutas else 0)
    otro = st.sidebar.selectbox("Escenario a comparar", rutas, index=rutas.index("scenarios/scenario2.json") if "scenarios/scenario2.json" in rutas else 1)
    sc_base = cargar_escenario(base)
    if sc_base is None or cargar_escenario(otro) is None:
        st.error("No se pudieron cargar los escenarios.")
        return
    n_runs = int(st.sidebar.slider("Corridas", min_value=1, max_value=100, value=int(sc_base.n_runs)))
    seed = int(st.sidebar.number_input("Semilla común", min_value=0, value=int(sc_base.seed), step=1))

    if not st.sidebar.button("Ejecutar"):
        st.info("Seleccione los escenarios y presione **Ejecutar**. Ambos lotes usan las mismas semillas por corrida.")
        return

    try:
        with st.spinner("Ejecutando lotes..."):
            rep_base = lote_cacheado(base, n_runs, seed)
            rep_otro = lote_cacheado(otro, n_runs, seed)
    except NumericalError as e:
        st.error(f"Fallo numérico: {e}")
        return
    st.sidebar.success("✅ Lotes completados")

    tabla = compare_reports(rep_base, rep_otro)
    st.markdown('<h2 class="sub-header">Reducción de la mediana</h2>', unsafe_allow_html=True)
    cols = st.columns(3)
    for col, (nombre, clave) in zip(cols, (("Seguimiento xy", "path_xy"), ("Estimación x", "est_x"), ("Estimación x en apagón", "est_x_blackout"))):
        with col:
            st.markdown(crear_metrica_html(nombre, tabla.at[clave, "median_reduction_pct"], "porcentaje", formato="{:.1f}%"), unsafe_allow_html=True)

    col1, col2 = st.columns(2)
    with col1:
        mostrar_reporte(rep_base)
    with col2:
        mostrar_reporte(rep_otro)

    st.markdown('<h2 class="sub-header">Tabla de reducción (%)</h2>', unsafe_allow_html=True)
    st.dataframe(tabla[["mean_reduction_pct", "median_reduction_pct"]].round(2), use_container_width=True)
    st.download_button("Descargar reporte base (JSON)", rep_base.to_json(), file_name="reporte_base.json")
    st.download_button("Descargar reporte comparado (JSON)", rep_otro.to_json(), file_name="reporte_comparado.json")


if __name__ == "__main__":
    main()
