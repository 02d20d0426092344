class TacoError(Exception):
    """Base error; `code` is the one-line tag the CLI prints."""

    code = "E_TACO"


class ConfigurationError(TacoError, ValueError):
    code = "E_CONFIG"


class EmptyInputError(TacoError, ValueError):
    code = "E_EMPTY"


class InputValidationError(TacoError, ValueError):
    code = "E_INPUT"


class LengthMismatchError(TacoError, ValueError):
    code = "E_LENGTH"


class CorruptArchiveError(TacoError, ValueError):
    code = "E_CORRUPT"


class TensorFileError(TacoError, OSError):
    code = "E_IO"

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")
