"""Error types shared across the package.

Domain errors (bad arguments for an otherwise supported operation) are plain
ValueError.  CapabilityError marks requests that are well-formed but exceed a
configured resource guard, so callers and the CLI can distinguish "you asked
wrong" from "too big to compute exactly".
"""


class CapabilityError(Exception):
    """Request exceeds a configured size/resource guard."""
