"""Speed limits for perturbed Markovian open quantum systems."""
__version__ = "0.1.0"
