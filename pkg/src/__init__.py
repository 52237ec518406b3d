"""
WaDeNet: wavelet-decomposition 1-D CNN speech classifier
"""

__version__ = "1.0.0"
