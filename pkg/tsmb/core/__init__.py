"""Classification schemes, cross-validation and seed handling."""
