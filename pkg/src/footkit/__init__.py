"""Off-nadir building footprint derivation, offset correction and evaluation."""
