"""Phase- and location-aware evaluation of synoptic weather discussions."""

__version__ = "0.1.0"
SCHEMA_VERSION = "1"
