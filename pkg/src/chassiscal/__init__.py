"""Wheel-odometry / IMU calibration toolkit for planar Mecanum robots.

IMU error model and Allan noise identification, camera projection models,
PCA tilt estimation and a least-squares solver for the planar IMU-to-chassis
extrinsics and chassis velocity scales, plus a simulator that produces
known-truth data for all of them.
"""

__version__ = "0.1.0"
