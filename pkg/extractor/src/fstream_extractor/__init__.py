"""Bridge real videos into the miscue feature-stream pipeline."""

from .extract import ExtractionError, ExtractionJob, extract, write_fstream

__version__ = "0.1.0"

__all__ = ["ExtractionError", "ExtractionJob", "extract", "write_fstream"]
