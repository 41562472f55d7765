"""JEANIE: joint temporal and viewpoint alignment for few-shot skeleton action recognition."""

__version__ = '1.0'
