# Big-bang singularity regularization package

__version__ = "1.0.0"
