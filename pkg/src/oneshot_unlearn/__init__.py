"""One-shot identity unlearning: synthetic benchmark, meta-learned unlearning
loss, baselines, and evaluation harness."""

__version__ = "0.1.0"
