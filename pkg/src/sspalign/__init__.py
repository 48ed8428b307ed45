"""Score how closely observed regional trajectories follow each SSP projection."""

__version__ = "0.1.0"
