"""drawnet: 1D/2D/3D CNN diagnostics for stylus drawing tests.

Encodes time-stamped pen signals into series, RGB rasters or voxel
grids, trains the same fixed CNN schedule in one, two or three
convolution dimensions, and reports confusion-matrix metrics.
"""

__version__ = "0.1.0"
