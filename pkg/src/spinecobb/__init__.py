"""Scoliosis measurement from binary vertebra segmentation masks."""

__version__ = "0.1.0"
