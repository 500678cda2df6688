"""Discrete weak KAM theory on finite cost systems."""
