class DataError(ValueError):
    """Malformed or inconsistent input data (bad file, index out of range, ...)."""
