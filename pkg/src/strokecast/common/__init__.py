"""Helpers shared across layers.

Module Organization:
    * **serialization**: JSON normalization and config digests for numpy, pandas, enum and
      dataclass values
    * **reporting**: rate-table rendering and experiment artifact writers
"""

from strokecast.common.serialization import config_digest, normalize_value, write_json

__all__: list[str] = [
    "config_digest",
    "normalize_value",
    "write_json",
]
