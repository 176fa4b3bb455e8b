"""
Polya sum process toolkit
Samplers, conditional kernels, boundary inference and identity checks
"""
__version__ = "0.1.0"
