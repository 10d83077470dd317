"""Best rank-constrained approximation of a nonlinear map from samples,
with decorrelated injections and the alternating optimal-injection loop."""

__version__ = "0.1.0"
