"""
Top-level package for the clock-auction solver.
"""
