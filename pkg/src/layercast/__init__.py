"""Minimum expected distortion power allocation for layered broadcast coding."""
