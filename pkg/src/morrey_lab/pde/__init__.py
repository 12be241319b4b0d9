"""Elliptic solvers and the inequality certifiers that use them."""
