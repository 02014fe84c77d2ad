"""Simulador de estimación de pose y control LQ-Servo de un cuadricóptero con mediciones intermitentes."""

__version__ = "0.1.0"
