"""Command-line orchestration: configuration, seeding, CSV and manifest output."""
