"""Drawdown and drawup insurance contract pricing."""
