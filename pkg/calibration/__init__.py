"""Hand-eye and robot-world calibration (AX = YB) on SE(3)."""

__version__ = '1.0.0'
