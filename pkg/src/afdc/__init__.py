"""Binary airfoil images to aerodynamic coefficients with a from-scratch CNN.

Pipeline: parse and pose coordinate files (``geometry``), rasterize with a
ground band (``raster``), label with a lumped-vortex panel oracle
(``oracle``), assemble split datasets (``dataset``), and train a VGG-style
regressor built on hand-written layers (``nn``, ``model``, ``training``).
"""
__version__ = "0.1.0"
