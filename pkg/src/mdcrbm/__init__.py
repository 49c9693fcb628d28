"""Restricted Boltzmann machine for mixed discrete/continuous tabular data."""
