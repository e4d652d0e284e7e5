"""Sequentially randomized Gibbs aggregation and minimax lower bounds."""
import jax

# Tolerances down to 1e-12 on log-partitions and similarities need float64.
jax.config.update("jax_enable_x64", True)

__version__ = "0.1.0"
