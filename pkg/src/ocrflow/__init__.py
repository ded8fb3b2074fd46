"""ocrflow: a semi-automatic OCR workflow engine for early printed books.

Submodules follow the processing pipeline: ``preprocess`` (binarization,
deskewing), ``layout`` (region segmentation and extraction), ``lineseg``
(text line segmentation), ``recognize`` (CTC decoding and confidence
voting over pluggable engines), ``training`` (iterative ground-truth
training loop), ``evaluate`` (CER and confusion analysis), ``pagexml``
(the document model carried between all of them), and ``project``/
``flow``/``service`` for orchestration, CLI and HTTP access.
"""

__version__ = "0.1.0"
