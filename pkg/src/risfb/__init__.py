"""Two-timescale cascaded-channel CSI feedback for RIS-assisted links."""
__version__ = "0.1.0"
