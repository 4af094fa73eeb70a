"""
Device database for omtherm.

Built-in presets describe a GaAs optomechanical crystal with a 2.3725 GHz
breathing mode and a telecom cavity. The two presets differ only in the
mechanical quality factor, which improves from about 1.1e3 at 4.2 K to
28,800 at millikelvin temperatures. Further devices can be stored in a JSON
database file.
"""

from pathlib import Path
from typing import Optional
import json

from omtherm.core.device import Device, MechanicalMode, OpticalMode

# Path to built-in device database
_DATABASE_PATH = Path(__file__).parent / "devices.json"

F_MECHANICAL = 2.3725e9
F_CAVITY = 193.7e12
KAPPA = 5.0e9
G0 = 1.3e6
N_CAV = 230.0


class DeviceDatabase:
    """
    Database of stored device definitions.

    Entries live in a JSON file; the built-in presets are always available
    through load_device.
    """

    def __init__(self, database_path: Optional[Path] = None):
        """
        Initialize the database.

        Args:
            database_path: Path to JSON database file. If None, uses built-in.
        """
        self.database_path = Path(database_path) if database_path else _DATABASE_PATH
        self._devices: dict[str, dict] = {}
        self._load_database()

    def _load_database(self):
        if self.database_path.exists():
            with open(self.database_path, "r") as f:
                self._devices = json.load(f).get("devices", {})

    def save_database(self):
        """Save current devices to the JSON file."""
        with open(self.database_path, "w") as f:
            json.dump({"devices": self._devices}, f, indent=2)

    def list_devices(self) -> list[str]:
        """Return the stored device names."""
        return list(self._devices.keys())

    def get(self, name: str) -> Device:
        """
        Load a stored device by name.

        Raises:
            KeyError: If no device of that name is stored
        """
        if name not in self._devices:
            raise KeyError(f"Device '{name}' not found. Available: {self.list_devices()}")
        return Device.from_dict(self._devices[name])

    def add(self, name: str, device: Device):
        """Add or replace a device entry."""
        self._devices[name] = device.to_dict()


def create_gaas_omc(Q_m: float, temperature_K: float, label: str) -> Device:
    """
    GaAs optomechanical crystal with the given mechanical quality factor.

    Args:
        Q_m: Mechanical quality factor at the characterization temperature
        temperature_K: Characterization temperature
        label: Preset name

    Returns:
        Device
    """
    return Device(
        name=label,
        mechanical=MechanicalMode(f_m=F_MECHANICAL, Q_m=Q_m),
        optical=OpticalMode(f_c=F_CAVITY, kappa=KAPPA, g0=G0, n_cav=N_CAV),
        temperature_K=temperature_K,
        notes="GaAs nanobeam optomechanical crystal, 2.3725 GHz breathing mode.",
    )


def get_builtin_devices() -> dict[str, Device]:
    """Return the built-in device presets."""
    return {
        "GaAs_OMC_mK": create_gaas_omc(Q_m=28_800, temperature_K=0.02, label="GaAs_OMC_mK"),
        "GaAs_OMC_4K": create_gaas_omc(Q_m=1.1e3, temperature_K=4.2, label="GaAs_OMC_4K"),
    }


def load_device(name: str, database_path: Optional[Path] = None) -> Device:
    """
    Load a device by name, from the database first and then the presets.

    Args:
        name: Device identifier
        database_path: Optional alternative database file

    Returns:
        Device

    Raises:
        KeyError: If the name is unknown
    """
    db = DeviceDatabase(database_path)
    try:
        return db.get(name)
    except KeyError:
        pass

    builtins = get_builtin_devices()
    if name in builtins:
        return builtins[name]

    available = sorted(set(builtins) | set(db.list_devices()))
    raise KeyError(f"Device '{name}' not found. Available: {available}")
