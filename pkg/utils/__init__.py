# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""utils/initialization."""

import contextlib
import platform


def emojis(str=""):
    """Returns an emoji-safe version of a string, stripped of emojis on Windows platforms."""
    return str.encode().decode("ascii", "ignore") if platform.system() == "Windows" else str


class TryExcept(contextlib.ContextDecorator):
    # TryExcept class. Usage: @TryExcept() decorator or 'with TryExcept():' context manager
    def __init__(self, msg=""):
        """Initializes TryExcept with an optional message, used as a decorator or context manager for error handling."""
        self.msg = msg

    def __enter__(self):
        """Enter the runtime context related to this object for error handling with an optional message."""
        pass

    def __exit__(self, exc_type, value, traceback):
        """Context manager exit method that prints an error message with emojis if an exception occurred, always returns
        True.
        """
        if value:
            print(emojis(f"{self.msg}{': ' if self.msg else ''}{value}"))
        return True


# Exceptions -----------------------------------------------------------------------------------------------------------
class SkinToneError(Exception):
    """Base class for every error raised by the skintone library."""


class ManifestError(SkinToneError, ValueError):
    """Dataset manifest could not be parsed or violates a record invariant."""


class PatchError(SkinToneError, ValueError):
    """Region polygon is out of bounds or encloses too few pixels."""


class DegenerateInputError(SkinToneError, ValueError):
    """Input carries no usable variation (all-zero matrix, identical faces, zero-variance kernel, ...)."""


class ModelFormatError(SkinToneError, ValueError):
    """Model file is malformed or internally inconsistent."""


class ModelVersionError(ModelFormatError):
    """Model file declares an unsupported format version."""


class MissingModelError(SkinToneError, LookupError):
    """A requested (train, test, metric) cell has no model to score with."""


class ScoreSchemaError(SkinToneError, ValueError):
    """Scores CSV does not follow the dataset,subject_id,sample_id,metric,score schema."""


class SpecError(SkinToneError, ValueError):
    """Synthetic dataset spec has one or more invalid fields."""

    def __init__(self, errors):
        """Stores the `{field: reason}` mapping and names every invalid field in the message."""
        self.errors = dict(errors)
        super().__init__("invalid synth spec: " + "; ".join(f"{k}: {v}" for k, v in self.errors.items()))
