"""Synthetic daily activity-travel chain generation over POI worlds.

The package is organized around four protocol-mediated tool services
(temporal, spatial, environment, memory), a five-stage decision agent that
composes them into person-day activity chains, a parallel batch pipeline,
and an evaluation harness scoring corpora for spatiotemporal fidelity and
diversity.
"""

from daychain.categories import ACTIVITY_CATEGORIES

__version__ = "0.1.0"

__all__ = ["ACTIVITY_CATEGORIES", "__version__"]
