"""Jerarquía de errores del simulador."""


class QuadsimError(Exception):
    """Error base del paquete."""


class ConfigError(QuadsimError, ValueError):
    """Escenario o configuración inválida."""


class NumericalError(QuadsimError):
    """Fallo numérico (Riccati, estabilidad, divergencia)."""


class DareConvergenceError(NumericalError):
    """La iteración de Riccati no convergió."""

    def __init__(self, residual, iterations):
        super().__init__(
            f"La DARE no convergió en {iterations} iteraciones (residuo {residual:.3e}); "
            "el par (Phi, Gamma) probablemente no es estabilizable"
        )
        self.residual = residual
        self.iterations = iterations


class UnstableClosedLoopError(NumericalError):
    """La ganancia sintetizada no estabiliza el lazo nominal."""

    def __init__(self, spectral_radius):
        super().__init__(f"Radio espectral de lazo cerrado {spectral_radius:.6f} >= 1")
        self.spectral_radius = spectral_radius


class SingularInnovationError(NumericalError):
    """Covarianza de innovación numéricamente singular (revise V2)."""


class DegenerateGeometryError(NumericalError):
    """Geometría de anclas o landmarks sin solución única."""


class DivergenceError(NumericalError):
    """La planta se salió de la región permitida."""

    def __init__(self, step=None, detail=""):
        where = f" en el paso {step}" if step is not None else ""
        super().__init__(f"Divergencia{where}{': ' + detail if detail else ''}")
        self.step = step
        self.detail = detail


class ExportError(QuadsimError, OSError):
    """Fallo de lectura/escritura de archivos de resultados."""

    def __init__(self, path, cause):
        super().__init__(f"No se pudo acceder a '{path}': {cause}")
        self.path = path
