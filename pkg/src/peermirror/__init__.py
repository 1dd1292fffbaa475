"""Learner error-profile extraction, mirrored essay generation and evaluation."""

from .edits import Edit, align, apply_edits, extract_edits, parse_change_list
from .taxonomy import Category, ErrorProfile, normalize_label, parse_error_counts, render_profile

__all__ = [
    "Category",
    "Edit",
    "ErrorProfile",
    "align",
    "apply_edits",
    "extract_edits",
    "normalize_label",
    "parse_change_list",
    "parse_error_counts",
    "render_profile",
]

__version__ = "0.1.0"
