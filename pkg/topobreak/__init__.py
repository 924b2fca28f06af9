# Topological break detection package
__version__ = "1.0.0"
