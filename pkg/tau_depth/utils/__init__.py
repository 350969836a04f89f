"""Utility helpers."""

from tau_depth.utils.validation import ValidationResult, validate_dataset

__all__ = ["ValidationResult", "validate_dataset"]
