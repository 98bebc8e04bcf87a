"""eopanel: gridded weather extraction, seasonal metrics, and a full
fixed-effects regression battery with robustness summaries."""

__version__ = "0.1.0"
