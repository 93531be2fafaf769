"""Exception hierarchy shared across the package.

Every error the library raises deliberately derives from WaveVerifyError,
and each class maps to one CLI exit code (see EXIT_CODES).
"""


class WaveVerifyError(Exception):
    """Base class for all errors raised on purpose by this package."""

    category = "error"


class ShapeError(WaveVerifyError):
    """Tensor or layer shapes are inconsistent. Message lists both shapes."""

    category = "shape-error"


class DomainError(WaveVerifyError):
    """An input value violates a documented precondition."""

    category = "domain-error"


class NumericError(WaveVerifyError):
    """Non-finite values where finite ones are required."""

    category = "numeric-error"


class InsufficientLengthError(DomainError):
    """A waveform is too short for the requested crop or network input."""

    category = "insufficient-length"

    def __init__(self, needed: int, actual: int, what: str = "waveform"):
        self.needed = needed
        self.actual = actual
        super().__init__(f"{what} has {actual} samples, needs at least {needed}")


class CapacityError(DomainError):
    """A request exceeds what the data can supply (e.g. trial counts)."""

    category = "capacity-error"


class CorpusFormatError(WaveVerifyError):
    """An on-disk corpus is malformed. Message names the offending file."""

    category = "corpus-format-error"


class ConfigError(WaveVerifyError):
    """An experiment config is unreadable or holds an invalid value."""

    category = "config-error"


class ContractError(WaveVerifyError):
    """A caller broke a protocol contract (e.g. training an unfrozen teacher)."""

    category = "contract-error"


class CheckpointMismatchError(ContractError):
    """A checkpoint's embedded architecture disagrees with the requested one."""

    category = "checkpoint-mismatch"


class MissingFileError(WaveVerifyError):
    """A referenced input file or directory does not exist."""

    category = "missing-file"


# CLI exit codes, one per failure category. 0 is success, 1 is reserved for
# unexpected internal errors, 2 is argparse usage errors.
EXIT_CODES = {
    "config-error": 3,
    "missing-file": 4,
    "checkpoint-mismatch": 5,
    "corpus-format-error": 6,
    "domain-error": 7,
    "insufficient-length": 7,
    "capacity-error": 7,
    "shape-error": 7,
    "numeric-error": 7,
    "contract-error": 7,
    "gradcheck-failed": 8,
    "error": 1,
}


def exit_code_for(err: WaveVerifyError) -> int:
    return EXIT_CODES.get(err.category, 1)
