"""Convolutional sparse coding: local/global pursuits and stripe-sparsity guarantees."""

__version__ = "0.1.0"
