"""Unit tests for tsmb."""
