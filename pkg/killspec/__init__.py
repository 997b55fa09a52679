"""
KILLSPEC - spectral laboratory for the Killing generator of stationary spacetimes
"""

__version__ = "1.0.0"
