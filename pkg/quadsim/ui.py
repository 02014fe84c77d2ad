import glob
import os

import streamlit as st

from quadsim.harness import build_design, simulate_run
from quadsim.data_loader import cargar_escenario

SCENARIO_DIR = "scenarios"

CSS = """<style>.main-header{font-size:2.3rem;color:#2C3E50;text-align:center;margin-bottom:1rem;}.sub-header{font-size:1.6rem;color:#34495E;margin-top:1.5rem;margin-bottom:1rem;}.metric-card{background-color:#F8F9FA;border-radius:8px;padding:1rem;box-shadow:0 4px 6px rgba(0,0,0,0.1);text-align:center;height:100%;}.metric-title{font-size:1rem;font-weight:600;color:#4B5563;margin-bottom:0.5rem;}.metric-value{font-size:2rem;font-weight:bold;}.metric-good{color:#10B981;}.metric-warning{color:#F59E0B;}.metric-bad{color:#EF4444;}.footer{text-align:center;margin-top:3rem;padding:1rem;font-size:0.8rem;color:#7F8C8D;}</style>"""


def crear_metrica_html(titulo, valor, descripcion=None, umbral_bueno=None, umbral_medio=None, formato="{:.4g}"):
    """
    Tarjeta HTML de una métrica.

    Con umbrales, el color indica el nivel: menor es mejor (MSE, radio espectral).
    """
    clase_color = ""
    if umbral_bueno is not None and umbral_medio is not None:
        clase_color = "metric-good" if valor <= umbral_bueno else "metric-warning" if valor <= umbral_medio else "metric-bad"
    html = f"""
    <div class="metric-card">
        <div class="metric-title">{titulo}</div>
        <div class="metric-value {clase_color}">{formato.format(valor)}</div>
    """
    if descripcion:
        html += f'<div style="font-size:0.9rem;color:#6B7280;margin-top:0.5rem;">{descripcion}</div>'
    html += "</div>"
    return html


def listar_escenarios():
    return sorted(glob.glob(os.path.join(SCENARIO_DIR, "*.json")))


def selector_escenario(etiqueta="Escenario", key="escenario", indice=0):
    """Selector de archivo de escenario en la barra lateral; devuelve (ruta, Scenario)."""
    rutas = listar_escenarios()
    if not rutas:
        st.sidebar.warning("No hay escenarios en 'scenarios/'; se usan los valores por defecto.")
        return None, cargar_escenario(None)
    ruta = st.sidebar.selectbox(etiqueta, rutas, index=min(indice, len(rutas) - 1), key=key)
    return ruta, cargar_escenario(ruta)


@st.cache_data(ttl=600)
def diseno_cacheado(ruta):
    """Ganancia y modelo aumentado del escenario, cacheados por ruta."""
    return build_design(cargar_escenario(ruta))


@st.cache_data(ttl=600)
def corrida_cacheada(ruta, seed):
    sc = cargar_escenario(ruta)
    return simulate_run(sc, seed, diseno_cacheado(ruta))
