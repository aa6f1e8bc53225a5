"""Command line interface for the snnmap mapping pipeline."""
