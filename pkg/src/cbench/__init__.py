"""cbench: a self-contained continuous-benchmarking toolkit.

Turns a declarative benchmark matrix into scheduled jobs, collects and
stores performance metrics as tagged time series, links run artifacts
into a metadata graph, computes hardware-bound analyses and exposes
everything over an HTTP API, report/plot emitters and a dashboard.
"""

__version__ = "0.1.0"
