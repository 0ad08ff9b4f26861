"""Dermoscopic lesion segmentation (B-Otsu, Canny fill, Chan-Vese, PSM, MAM),
ABC feature extraction and weighted-ROC melanoma classification."""

__version__ = "0.1.0"
