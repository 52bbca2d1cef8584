"""Test suite for tsmb."""
