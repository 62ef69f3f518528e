"""rislab: RIS-assisted indoor mmWave simulation and risk-sensitive
policy-gradient control, with brute-force oracles for desk-scale verification.
"""

__version__ = "0.1.0"
