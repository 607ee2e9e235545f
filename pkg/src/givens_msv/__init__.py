"""Full factor multivariate stochastic volatility with Givens-angle dynamics."""
