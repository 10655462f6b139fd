"""Exception types raised by the simulator."""


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(SimulationError, ValueError):
    pass


class TopologyError(SimulationError):
    pass


class ScheduleError(SimulationError):
    pass


class NumericError(SimulationError, ArithmeticError):
    pass


class FormatError(SimulationError, ValueError):
    """Malformed input file. ``offset`` is the byte position of the fault."""

    def __init__(self, message, offset=0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class PartitionError(SimulationError, ValueError):
    def __init__(self, message, starved_class=None):
        super().__init__(message)
        self.starved_class = starved_class
