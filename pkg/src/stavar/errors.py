"""Exception hierarchy.

Three families map onto CLI exit codes: configuration problems (2), bad
input data (3) and numerical failures (4).
"""


class StavarError(Exception):
    exit_code = 1


class ConfigError(StavarError):
    exit_code = 2


class DataError(StavarError):
    exit_code = 3


class NumericalError(StavarError):
    exit_code = 4


# --- data -----------------------------------------------------------------

class MissingCell(DataError):
    pass


class UnknownUnit(DataError):
    pass


class BadAdoptTime(DataError):
    pass


class ConstantColumn(DataError):
    pass


class MissingValue(DataError):
    pass


class InsufficientPreperiod(DataError):
    pass


class MissingArtifact(DataError):
    pass


# --- config ---------------------------------------------------------------

class InvalidConfig(ConfigError):
    pass


# --- numerics -------------------------------------------------------------

class RankDeficient(NumericalError):
    pass


class RankDeficientDesign(NumericalError):
    pass


class SingularGram(NumericalError):
    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class NotPD(NumericalError):
    pass


class NoConverge(NumericalError):
    pass


class SingularConditional(NumericalError):
    pass


class SingularSigma22(NumericalError):
    pass


class NoUnitsAtLag(NumericalError):
    pass


class EmptyCluster(NumericalError):
    pass
