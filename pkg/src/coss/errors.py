"""Exception hierarchy shared by all coss modules.

The CLI maps these onto distinct exit codes (see `coss.cli`), so raising the
right class matters for scripting.
"""


class CossError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CossError):
    """Invalid or inconsistent configuration (rates, kernels, split ratios...)."""


class InputError(CossError):
    """Bad runtime input: missing branch data, out-of-range labels, short streams."""


class DataError(InputError):
    """Problem parsing or validating dataset files (manifest, channel files)."""


class ShapeError(InputError):
    """Tensor shape mismatch in an nn op or model forward."""


class NumericError(CossError):
    """Non-finite values, divergence, or other numeric hazards."""


class StateError(CossError):
    """Operation illegal in the current state (backward twice, pruning the last sensor)."""
