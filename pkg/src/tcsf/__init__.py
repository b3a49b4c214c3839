"""Zeroth-order stochastic optimization with truncated Cauchy smoothed-functional gradients."""
