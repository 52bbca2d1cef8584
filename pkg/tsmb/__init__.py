"""tsmb - state-based time series classification with HMM and FCM model banks."""

__version__ = "0.1.0"
