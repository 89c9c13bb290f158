"""Extremum tracking and size estimation over networks with node churn.

The package simulates synchronous max/min-consensus protocols on undirected
networks whose node set changes at runtime, computes the matching worst-case
tracking bounds, and estimates the active network size from anonymous
consensus states.
"""

from __future__ import annotations

__version__ = "0.1.0"
