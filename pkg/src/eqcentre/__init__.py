"""Rediscovering the Equation of the Centre from ephemerides.

Stages: ``ingest`` (ephemeris tables), ``frames`` (coordinates and plane
fitting), ``kepler`` (exact and series references), ``cycles`` (apsides,
anomalies and residuals), ``sregress`` (biased symbolic regression),
``framesearch`` (search over reference frames), ``synth`` (ground-truth
two-body data) and ``cli``.
"""

__version__ = "0.1.0"
