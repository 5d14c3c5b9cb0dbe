"""Causal-cone circuit reduction, measurement planning and native compilation for VQE/QAOA."""
