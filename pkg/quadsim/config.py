"""Ajustes de ejecución leídos del entorno (.env incluido)."""

import logging
import os
from dataclasses import dataclass
from functools import lru_cache

from dotenv import load_dotenv

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


@dataclass(frozen=True)
class Settings:
    log_level: str = "INFO"
    n_jobs: int = 1
    scenario_path: str | None = None
    output_dir: str = "."


@lru_cache(maxsize=1)
def get_settings():
    """
    Carga los ajustes desde variables de entorno.

    El archivo .env (si existe) se carga una sola vez; las variables ya
    definidas en el entorno tienen prioridad sobre las del archivo.

    Returns:
        Settings: Ajustes de ejecución.
    """
    load_dotenv(override=False)
    try:
        n_jobs = int(os.environ.get("QUADSIM_N_JOBS", "1"))
    except ValueError:
        n_jobs = 1
    return Settings(
        log_level=os.environ.get("QUADSIM_LOG_LEVEL", "INFO").upper(),
        n_jobs=n_jobs,
        scenario_path=os.environ.get("QUADSIM_SCENARIO") or None,
        output_dir=os.environ.get("QUADSIM_OUTPUT_DIR", "."),
    )


def configure_logging(level=None):
    """Configura el logger raíz; sólo lo llaman los puntos de entrada."""
    level = level or get_settings().log_level
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO), format=LOG_FORMAT)
