"""
Moderate deviations toolkit for near-unit-root autoregressions.
"""

__version__ = '0.1.0'
