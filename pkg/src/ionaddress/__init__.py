"""Microwave near-field individual addressing of trapped-ion hyperfine qubits.

Simulation and design tools for two 25Mg+ qubits driven by oscillating
near-fields from three microwave electrodes of a surface-electrode trap.
"""

__version__ = "0.1.0"
