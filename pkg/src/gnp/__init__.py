"""Two-stage vehicle trajectory prediction: goal network plus neural social-force rollout."""

__version__ = "0.1.0"
