"""Two-timescale transmit design for a dual-function radar-communication
array with grid-quantized movable elements."""

__version__ = "0.1.0"
