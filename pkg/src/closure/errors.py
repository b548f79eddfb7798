class DomainError(ValueError):
    """Input outside an operation's domain (degenerate geometry, empty sets, bad bounds)."""
