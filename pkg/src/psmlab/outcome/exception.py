from typing import Any

from psmlab.outcome.base import Result


class UnwrapError(Exception):
    """Raised when a ``Result`` is unwrapped on the wrong variant.

    Also the carrier used by ``question`` to leave a function decorated with
    ``@result`` early.

    Attributes:
        result (Result[Any, Any]): The result that could not be unwrapped
    """

    def __init__(self, result: Result[Any, Any], message: str) -> None:
        self.result: Result[Any, Any] = result
        super().__init__(message)
