"""Index and stability computations for elliptic relative equilibria."""
