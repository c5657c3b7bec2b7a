"""mapbench: SLAM localization-error benchmarking and performance
prediction from floor-plan features."""

__version__ = "0.1.0"
