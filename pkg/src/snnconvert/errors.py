"""Exception types shared across the package."""


class SnnConvertError(Exception):
    """Base class for all package errors."""


class ShapeError(SnnConvertError, ValueError):
    """Operand shapes do not compose."""


class ConfigError(SnnConvertError, ValueError):
    """Invalid configuration or arguments."""


class ParseError(SnnConvertError, ValueError):
    """Malformed input file (reports byte or line position)."""


class ConversionError(SnnConvertError, ValueError):
    """Network cannot be converted to spiking form."""


class TrainingDivergedError(SnnConvertError, RuntimeError):
    """Loss became non-finite during training."""


class SimulationError(SnnConvertError, RuntimeError):
    """Membrane potential became non-finite during simulation."""
