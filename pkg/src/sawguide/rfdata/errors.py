class RfDataError(Exception):
    pass


class TouchstoneParseError(RfDataError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class PassivityError(RfDataError, ValueError):
    def __init__(self, frequency, magnitude):
        self.frequency = frequency
        super().__init__(f"|S11| = {magnitude:.6g} >= 1 at {frequency:.9g} Hz "
                         f"(not a passive one-port)")


class UnderdeterminedError(RfDataError, ValueError):
    pass


class AmbiguousBandError(RfDataError, ValueError):
    pass


class DomainError(RfDataError, ValueError):
    pass
