"""Report files, run records and spreadsheet export."""
