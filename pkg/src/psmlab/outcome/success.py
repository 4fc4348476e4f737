import dataclasses
from collections.abc import Callable, Iterator
from typing import TypeVar

from psmlab.outcome.base import Result
from psmlab.outcome.exception import UnwrapError

T = TypeVar("T")
E = TypeVar("E")
R = TypeVar("R")


@dataclasses.dataclass(match_args=True, slots=True, eq=False)
class Ok(Result[T, E]):
    """Successful outcome.

    Attributes:
        value (T): Value produced by the operation

    Example:
        >>> Ok(0.5).map(lambda f1: f1 * 100)
        Ok(50.0)
    """

    value: T

    def __hash__(self) -> int:
        try:
            return hash(self.value)
        except TypeError:
            # arrays, bundles and other mutable payloads
            return id(self.value)

    def is_ok(self) -> bool:
        return True

    def is_err(self) -> bool:
        return False

    def unwrap(self) -> T:
        return self.value

    def unwrap_err(self) -> E:
        msg = f"Called unwrap_err on an Ok value: {self.value!r}"
        raise UnwrapError(self, msg)

    def map(self, func: Callable[[T], R]) -> Result[R, E]:
        return Ok(func(self.value))

    def and_then(self, func: Callable[[T], Result[R, E]]) -> Result[R, E]:
        return func(self.value)

    def iter(self) -> Iterator[T]:
        yield self.value
