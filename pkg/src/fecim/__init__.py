"""Behavioral simulator of a temperature-resilient multibit ferroelectric
compute-in-memory design: device, cell, array, ADC, quantized inference,
and an analytical energy/latency/area estimator."""

__version__ = "0.1.0"
