"""HTTP run service over the pipeline entry points."""
