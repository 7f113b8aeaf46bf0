"""Identification over classical-quantum broadcast channels.

Submodules: qstate, channels, entropic, regions, typicality, idcode,
converse and cli.  Importing the package itself stays cheap so the CLI can
set thread limits before numpy loads.
"""

from .errors import QidError

__version__ = "0.1.0"

__all__ = ["QidError", "__version__"]
