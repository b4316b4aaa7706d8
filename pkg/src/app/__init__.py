"""Command line application: configuration, logging, metrics, commands."""
