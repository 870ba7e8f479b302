"""Bayesian model averaging across a partially identified model and identified
sub-models: limiting posterior weights, limiting posterior means and
large-sample Bayes risk by Monte Carlo."""

__version__ = "0.1.0"
