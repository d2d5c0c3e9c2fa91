"""Compile MBQC patterns with gflow into quantum circuits and verify them densely."""
