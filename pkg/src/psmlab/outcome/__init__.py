from .base import Result
from .deco import collect, question, result
from .exception import UnwrapError
from .failure import Err
from .success import Ok

__all__ = ["Err", "Ok", "Result", "UnwrapError", "collect", "question", "result"]
