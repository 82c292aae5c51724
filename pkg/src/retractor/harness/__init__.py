"""Oracles, property audits and run reports."""
