"""Trace containers and report files."""

from omtherm.io.export import read_columns, write_columns, write_json
from omtherm.io.tracefile import read_traceset, write_traceset

__all__ = ["read_traceset", "write_traceset", "write_json", "write_columns", "read_columns"]
