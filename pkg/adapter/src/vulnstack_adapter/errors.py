class AdapterError(Exception):
    """Any failure the adapter can attribute to its inputs or training."""
