"""
Device presets for omtherm.
"""

from omtherm.devices.database import DeviceDatabase, get_builtin_devices, load_device

__all__ = ["DeviceDatabase", "get_builtin_devices", "load_device"]
