"""HTTP API of the model toolkit."""
