"""
Métricas de desempeño: MSE de estimación y de seguimiento por corrida,
agregados Monte Carlo con percentiles, comparación entre escenarios y NEES.
"""

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import chi2

from quadsim.filters import blackout_mask

logger = logging.getLogger(__name__)

AXES = ("x", "y", "z")
METRIC_COLUMNS = (
    "est_x",
    "est_y",
    "est_z",
    "path",
    "path_x",
    "path_y",
    "path_z",
    "path_xy",
    "est_x_blackout",
    "est_y_blackout",
    "est_z_blackout",
)
SUMMARY_ROWS = ("mean", "p25", "median", "p75")


def mse_metrics(log):
    """
    MSE de una corrida.

    La estimación compara posición verdadera contra x̂_{k|k−1}; el
    seguimiento compara posición verdadera contra la referencia en el mismo
    índice k.

    Args:
        log (RunLog): Bitácora con al menos un paso.

    Returns:
        dict: Una entrada por cada nombre de METRIC_COLUMNS.
    """
    if len(log) == 0:
        raise ValueError("La bitácora está vacía")
    pos = log.truth[:, :3]
    est_err2 = (pos - log.estimate[:, :3]) ** 2
    path_err2 = (pos - log.reference) ** 2

    out = {f"est_{a}": float(np.mean(est_err2[:, j])) for j, a in enumerate(AXES)}
    out["path"] = float(np.mean(np.sum(path_err2, axis=1)))
    out.update({f"path_{a}": float(np.mean(path_err2[:, j])) for j, a in enumerate(AXES)})
    out["path_xy"] = float(np.mean(path_err2[:, 0] + path_err2[:, 1]))

    rows = blackout_mask(pos[:, 0], log.blackout)
    for j, a in enumerate(AXES):
        out[f"est_{a}_blackout"] = float(np.mean(est_err2[rows, j])) if np.any(rows) else float("nan")
    return out


def path_mse_xy(desired_xy, actual_xy):
    """MSE planar entre la trayectoria deseada y la real, paso a paso."""
    d = np.asarray(desired_xy, dtype=float)
    a = np.asarray(actual_xy, dtype=float)
    if d.size == 0:
        return float("nan")
    return float(np.mean(np.sum((a - d) ** 2, axis=1)))


@dataclass
class MseReport:
    """Resultados de un lote Monte Carlo: métricas por corrida y corridas fallidas."""

    per_run: pd.DataFrame
    failed: list = field(default_factory=list)
    label: str = ""

    @classmethod
    def from_runs(cls, results, label=""):
        """
        Arma el reporte a partir de los resultados del lote.

        Args:
            results (list): Tuplas (run, metrics | None, failed_step | None).
            label (str, optional): Nombre del escenario.
        """
        rows, failed = [], []
        for run, metrics, failed_step in results:
            if failed_step is not None:
                failed.append({"run": run, "step": failed_step})
            else:
                rows.append({"run": run, **metrics})
        per_run = pd.DataFrame(rows, columns=["run", *METRIC_COLUMNS]).set_index("run")
        if failed:
            logger.warning("%s: %d de %d corridas fallaron", label or "lote", len(failed), len(results))
        return cls(per_run=per_run, failed=failed, label=label)

    @property
    def n_runs(self):
        return len(self.per_run) + len(self.failed)

    @property
    def n_failed(self):
        return len(self.failed)

    @property
    def summary(self):
        """Media y percentiles 25/50/75 (interpolación lineal) por métrica."""
        data = self.per_run.astype(float)
        q = data.quantile([0.25, 0.5, 0.75], interpolation="linear")
        table = pd.DataFrame(
            [data.mean(), q.loc[0.25], q.loc[0.5], q.loc[0.75]],
            index=list(SUMMARY_ROWS),
        )
        return table[list(METRIC_COLUMNS)]

    def to_dict(self):
        summary = self.summary
        return {
            "label": self.label,
            "n_runs": self.n_runs,
            "n_failed": self.n_failed,
            "failed": self.failed,
            "summary": {
                col: {row: _json_float(summary.at[row, col]) for row in SUMMARY_ROWS} for col in METRIC_COLUMNS
            },
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)

    def to_table(self, columns=None):
        """Tabla alineada para consola."""
        summary = self.summary.T
        if columns is not None:
            summary = summary.loc[list(columns)]
        header = f"{self.label} (corridas {self.n_runs}, fallidas {self.n_failed})"
        return header + "\n" + summary.to_string(float_format=lambda v: f"{v:.6g}")


def _json_float(v):
    return None if pd.isna(v) else float(v)


def compare_reports(base, other):
    """
    Reducción porcentual de media y mediana de `other` respecto de `base`.

    Returns:
        pandas.DataFrame: Una fila por métrica.
    """
    sb, so = base.summary, other.summary
    table = pd.DataFrame(index=list(METRIC_COLUMNS))
    for stat in ("mean", "median"):
        b, o = sb.loc[stat], so.loc[stat]
        table[f"{stat}_base"] = b
        table[f"{stat}_other"] = o
        table[f"{stat}_reduction_pct"] = 100.0 * (b - o) / b.where(b > 0)
    return table


def nees(errors, covariances):
    """
    NEES por paso: εₖ = eₖᵀ Pₖ⁻¹ eₖ.

    Args:
        errors (array_like): Errores de estimación, N×n.
        covariances (array_like): Covarianzas reportadas por el filtro, N×n×n.

    Returns:
        numpy.ndarray: N valores de NEES.
    """
    e = np.atleast_2d(np.asarray(errors, dtype=float))
    p = np.asarray(covariances, dtype=float).reshape(e.shape[0], e.shape[1], e.shape[1])
    sol = np.linalg.solve(p, e[..., None])[..., 0]
    return np.einsum("ij,ij->i", e, sol)


def nees_band(dim, n_runs, alpha=0.05):
    """
    Banda bilateral chi-cuadrado del NEES promediado sobre n_runs corridas.

    Returns:
        tuple: (límite inferior, límite superior).
    """
    if dim < 1 or n_runs < 1 or not 0 < alpha < 1:
        raise ValueError("dim y n_runs deben ser ≥ 1 y alpha en (0, 1)")
    dof = dim * n_runs
    return chi2.ppf(alpha / 2, dof) / n_runs, chi2.ppf(1 - alpha / 2, dof) / n_runs


def identificar_problemas(report, umbral_alerta=0.05, umbral_critico=0.25):
    """
    Señala métricas cuya mediana supera los umbrales (m²).

    Args:
        report (MseReport): Reporte a revisar.
        umbral_alerta (float, optional): Umbral de alerta.
        umbral_critico (float, optional): Umbral crítico.

    Returns:
        tuple: (problemas críticos, alertas) como listas de dicts.
    """
    problemas, alertas = [], []
    medianas = report.summary.loc["median"]
    for metrica, valor in medianas.items():
        if pd.isna(valor):
            continue
        item = {"metrica": metrica, "valor": float(valor)}
        if valor > umbral_critico:
            problemas.append(item)
        elif valor > umbral_alerta:
            alertas.append(item)
    if report.n_failed:
        problemas.append({"metrica": "corridas_fallidas", "valor": float(report.n_failed)})
    return problemas, alertas
