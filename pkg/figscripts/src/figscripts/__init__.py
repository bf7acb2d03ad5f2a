"""Figure rendering for cvlattice run directories.

A deliberately thin consumer of the documented CSV schemas: it never
recomputes or reinterprets the numbers, it only draws them.
"""

__version__ = "0.1.0"
