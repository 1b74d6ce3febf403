"""Scenario runner: JSON configs in, JSON reports and CSV tables out."""
