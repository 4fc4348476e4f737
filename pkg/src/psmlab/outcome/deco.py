import functools
from collections.abc import Callable, Iterable
from typing import ParamSpec, TypeVar

from psmlab.outcome.base import Result
from psmlab.outcome.exception import UnwrapError
from psmlab.outcome.failure import Err
from psmlab.outcome.success import Ok

T = TypeVar("T")
E = TypeVar("E")
P = ParamSpec("P")


def result(func: Callable[P, Result[T, E]]) -> Callable[P, Result[T, E]]:
    """Let ``question`` return early from a function producing a ``Result``.

    Args:
        func (Callable[P, Result[T, E]]): Function to decorate

    Returns:
        Callable[P, Result[T, E]]: Function returning the first ``Err`` met by ``question``

    Example:
        >>> @result
        ... def train_then_embed(corpus, identity):
        ...     bundle = question(train_psm(corpus, identity, regime, model))
        ...     return embed_sequence(bundle, corpus.sequence(identity))
    """

    @functools.wraps(func)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> Result[T, E]:
        try:
            return func(*args, **kwargs)
        except UnwrapError as e:
            return e.result

    return wrapper


def question(outcome: Result[T, E]) -> T:
    """Rust's ``?``: the value of an ``Ok``, or leave the enclosing ``@result`` function.

    Args:
        outcome (Result[T, E]): Result to evaluate

    Returns:
        T: Value in case of ``Ok``

    Raises:
        UnwrapError: If ``outcome`` is ``Err``; caught by ``@result``
    """
    if outcome.is_ok():
        return outcome.unwrap()
    raise UnwrapError(outcome, f"propagated: {outcome.unwrap_err()}")


def collect(outcomes: Iterable[Result[T, E]]) -> Result[list[T], E]:
    """Gather successes in order, stopping at the first failure.

    Args:
        outcomes (Iterable[Result[T, E]]): Results to gather

    Returns:
        Result[list[T], E]: All values, or the first ``Err``
    """
    values: list[T] = []
    for outcome in outcomes:
        if outcome.is_err():
            return Err(outcome.unwrap_err())
        values.append(outcome.unwrap())
    return Ok(values)
