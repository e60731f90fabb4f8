"""Delay-optimal cooperative edge caching over Poisson small-cell networks."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    CachePlacement,
    FileLibrary,
    GroupLoad,
    NetworkParams,
    SpectralProfile,
    average_delay,
    group_load,
    optimal_bandwidth,
    spectral_profile,
)
from .placement import greedy_place, place_hit_ratio_maximal, place_non_cooperative  # noqa: E402
from .popularity import Popularity, ZipfParams, load_trace, zipf_popularity  # noqa: E402

__all__ = [
    "CachePlacement", "FileLibrary", "GroupLoad", "NetworkParams", "SpectralProfile",
    "average_delay", "group_load", "optimal_bandwidth", "spectral_profile",
    "greedy_place", "place_hit_ratio_maximal", "place_non_cooperative",
    "Popularity", "ZipfParams", "load_trace", "zipf_popularity",
]
