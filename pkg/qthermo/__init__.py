"""
qthermo – non-Markovian quantum thermometry with HEOM, Bloch–Redfield,
QFI metrology, BLP non-Markovianity and swarm-based control.
"""

__version__ = "0.1.0"
