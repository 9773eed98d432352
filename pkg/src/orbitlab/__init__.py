"""Magnetic geodesic flow and magnetic billiards on S^3 and L(p;1)."""
__version__ = "0.1.0"
