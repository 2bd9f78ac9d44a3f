"""Optional SQL registry of CLI runs."""
