"""Exception hierarchy for the package."""


class FssBpsoError(Exception):
    """Base class for all errors raised by fss_bpso."""


class SymmetryViolation(FssBpsoError, ValueError):
    pass


class DegenerateData(FssBpsoError, ValueError):
    pass


class EnsembleTooSmall(FssBpsoError, ValueError):
    pass


class MissingEnsemble(FssBpsoError, ValueError):
    pass


class MissingOracle(FssBpsoError, ValueError):
    pass


class NoBeacons(FssBpsoError, ValueError):
    pass


class EmptySample(FssBpsoError, ValueError):
    pass


class LengthMismatch(FssBpsoError, ValueError):
    pass


class ConstantSample(FssBpsoError, ValueError):
    pass


class MissingModel(FssBpsoError, FileNotFoundError):
    pass


class ConfigInvalid(FssBpsoError, ValueError):
    pass


class TargetMismatch(FssBpsoError, ValueError):
    pass
