"""Version 1 of the model API."""
