"""graspbench: deterministic bin-picking simulator and grasp-reasoning harness."""

__version__ = "0.1.0"
