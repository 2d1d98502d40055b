//! Holds the acceptance suite in `tests/`; nothing to export.
