"""Errors, seeded random streams, parallel map and the run configuration shared by all commands."""
