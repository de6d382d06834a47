"""Fixture layout design for compliant parts by convex relaxation."""
