"""Plots for channel control experiment outputs.

Consumes only the CSV files the experiment CLI writes (centerline
profiles, sweep tables); no mesh or solver logic.
"""

from .profiles import ProfileRecord, load_profile, plot_profiles
from .sweep import load_sweep, plot_sweep

__version__ = "0.1.0"
