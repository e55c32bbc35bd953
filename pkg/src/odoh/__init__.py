"""Oblivious DNS over HTTPS: protocol core, services, client, and bench harness."""

__version__ = "0.1.0"
