import dataclasses
from collections.abc import Callable, Iterator
from typing import TypeVar

from psmlab.outcome.base import Result
from psmlab.outcome.exception import UnwrapError

T = TypeVar("T")
E = TypeVar("E")
R = TypeVar("R")


@dataclasses.dataclass(match_args=True, slots=True, eq=False)
class Err(Result[T, E]):
    """Failed outcome.

    Attributes:
        error (E): Failure payload, a ``PsmError`` throughout psmlab

    Example:
        >>> Err("no frames").map(len)
        Err('no frames')
    """

    error: E

    def __hash__(self) -> int:
        return hash(self.error)

    def is_ok(self) -> bool:
        return False

    def is_err(self) -> bool:
        return True

    def unwrap(self) -> T:
        msg = f"Called unwrap on an Err value: {self.error}"
        raise UnwrapError(self, msg)

    def unwrap_err(self) -> E:
        return self.error

    def map(self, func: Callable[[T], R]) -> Result[R, E]:  # noqa: ARG002
        return Err(self.error)

    def and_then(self, func: Callable[[T], Result[R, E]]) -> Result[R, E]:  # noqa: ARG002
        return Err(self.error)

    def iter(self) -> Iterator[T]:
        yield from ()
