"""Experiments: training runs and the analyses built on trained models"""

__version__ = "0.1.0"
