"""Pinned run configurations and regression ceilings shipped with the package."""
