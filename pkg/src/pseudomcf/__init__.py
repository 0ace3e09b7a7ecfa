"""Geometry of spacelike homothetic solutions of mean curvature flow in
pseudo-Euclidean ambient spaces, verified numerically at desk scale."""

from .ambient import Signature

__all__ = ["Signature"]
__version__ = "0.1.0"
