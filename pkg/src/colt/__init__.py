"""Repository-level code completion toolkit."""
