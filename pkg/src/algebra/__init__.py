"""Exact layer: pair partitions, free Fock space, Weyl algebra, noise-word reduction."""
