"""Subcommands of the pgx-select command line."""
