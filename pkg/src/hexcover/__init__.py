"""Coverage planning for two-layer hexagonal cellular networks."""
