"""Mammogram analysis toolkit.

Two-stage pipeline: a small convolutional network screens mammograms
as normal or abnormal, then the tumor region is segmented by a level
set initialized from spatial fuzzy c-means clustering, after a
BM3D-style denoising and enhancement chain.
"""

__version__ = "0.1.0"
