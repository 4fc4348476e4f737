"""Person-specific facial motion models trained by cycle consistency."""

from psmlab.errors import ErrorKind, PsmError
from psmlab.outcome import Err, Ok, Result

__version__ = "0.1.0"

__all__ = ["Err", "ErrorKind", "Ok", "PsmError", "Result", "__version__"]
