"""Exception hierarchy shared by all powermodem modules."""


class ModemError(Exception):
    """Base class for all errors raised by powermodem."""


# framing
class InvalidPayloadLength(ModemError, ValueError):
    pass


class InvalidLength(ModemError, ValueError):
    pass


class BadPreamble(ModemError):
    pass


class CrcMismatch(ModemError):
    pass


# modulation plans
class PlanError(ModemError, ValueError):
    pass


class SpacingViolation(PlanError):
    pass


class NyquistViolation(PlanError):
    pass


class BandViolation(PlanError):
    pass


class InvalidOrder(PlanError):
    pass


# load transmitter
class EmptyCoreSet(ModemError, ValueError):
    pass


class FrequencyTooHigh(ModemError, ValueError):
    pass


class AffinityUnsupported(ModemError):
    pass


class ClockResolutionTooCoarse(ModemError):
    pass


class RateTooHigh(ModemError, ValueError):
    pass


class TransmissionBusy(ModemError, RuntimeError):
    """Raised when a second transmission is started in the same process."""


# channel
class UnknownCoreCount(ModemError, KeyError):
    pass


# receiver
class OutOfBounds(ModemError, IndexError):
    pass


class NoPreambleFound(ModemError):
    pass


# harness
class TooShort(ModemError, ValueError):
    pass


class UnsupportedFormat(ModemError, ValueError):
    pass
