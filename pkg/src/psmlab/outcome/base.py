import abc
from collections.abc import Callable, Iterator
from typing import Generic, TypeVar

T = TypeVar("T")  # Type of the value of a successful stage
E = TypeVar("E")  # Type of the failure payload
R = TypeVar("R")  # Type produced by a mapping function


class Result(Generic[T, E], abc.ABC):
    """Outcome of a pipeline operation: a value or a failure payload.

    Every fallible public operation of psmlab returns ``Result[T, PsmError]``
    instead of raising, so that stage failures (a missing label file, a
    degenerate landmark set, a non-finite loss) travel as values up to the
    command line, where they are turned into exit codes.

    Attributes:
        T: Type parameter for the success value
        E: Type parameter for the failure payload

    Note:
        ``Ok`` and ``Err`` implement the abstract methods. Equality compares the
        variant and the wrapped payload.
    """

    @abc.abstractmethod
    def __hash__(self) -> int: ...

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Result):
            return False
        if self.is_ok() != other.is_ok():
            return False
        if self.is_ok():
            return bool(self.unwrap() == other.unwrap())
        return bool(self.unwrap_err() == other.unwrap_err())

    def __ne__(self, other: object) -> bool:
        return not self.__eq__(other)

    def __repr__(self) -> str:
        if self.is_ok():
            return f"Ok({self.unwrap()!r})"
        return f"Err({self.unwrap_err()!r})"

    @abc.abstractmethod
    def is_ok(self) -> bool:
        """True for ``Ok``."""

    @abc.abstractmethod
    def is_err(self) -> bool:
        """True for ``Err``."""

    @abc.abstractmethod
    def unwrap(self) -> T:
        """Extract the success value.

        Raises:
            UnwrapError: If the result is ``Err``
        """

    @abc.abstractmethod
    def unwrap_err(self) -> E:
        """Extract the failure payload.

        Raises:
            UnwrapError: If the result is ``Ok``
        """

    @abc.abstractmethod
    def map(self, func: Callable[[T], R]) -> "Result[R, E]":
        """Transform the success value, leaving failures untouched.

        Args:
            func (Callable[[T], R]): Function to apply

        Returns:
            Result[R, E]: New result after function application
        """

    @abc.abstractmethod
    def and_then(self, func: Callable[[T], "Result[R, E]"]) -> "Result[R, E]":
        """Chain a further fallible stage onto a success value.

        Args:
            func (Callable[[T], Result[R, E]]): Next stage
        """

    @abc.abstractmethod
    def iter(self) -> Iterator[T]:
        """Iterate over zero (``Err``) or one (``Ok``) success values."""
