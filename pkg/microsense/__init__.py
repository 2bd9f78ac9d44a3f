"""
microsense: detection of a small chemical source by micro-robots flowing
through the capillaries of a tissue volume.
"""

__version__ = "0.1.0"
