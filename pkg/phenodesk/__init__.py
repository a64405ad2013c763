"""
phenodesk: crop phenotyping from plot images (segmentation, emergence counting,
biomass regression) with a numpy network core.
"""

__version__ = '0.3.0'
