"""inkline: handwritten page scans -> writer-identification datasets.

Binarize, segment into text lines, filter, normalize, augment, split,
then enroll and score a classical writer-ID baseline.
"""

__version__ = "0.1.0"
