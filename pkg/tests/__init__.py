"""
qheat tests package.

Unit tests for the solvers, analyses and command line; the long
acceptance checks are in test_acceptance.py.
"""
