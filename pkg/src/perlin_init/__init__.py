"""Network initialization by pretraining on a labeled Perlin noise classification task."""

__version__ = "0.1.0"
