"""sketchtint: language-guided colorization of line-drawn scene sketches."""

__version__ = "0.1.0"
