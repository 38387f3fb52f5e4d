"""
Utility functions shared by the rcrskit modules.  Not meant to be ran on its own.
"""

__author__ = "rcrskit developers"
__version__ = "0.1.0"
__license__ = "MIT"

import logging
import re
import sys
import unicodedata
from typing import Any, NoReturn, Type

from rcrskit.errors import RcrsError

LOG_FORMAT = "%(asctime)s %(levelname)s %(module)s: %(message)s"


def raise_error(
    error_message: str, exception_error: Any, error_type: Type[RcrsError] = RcrsError
) -> NoReturn:
    """
    Third party exceptions (json, jsonschema, OS errors) do not carry enough context for a
    command line user.  This function re-raises them as an rcrskit error with a custom message,
    keeping the original exception as the cause.

    Args:
        error_message (str): Custom error message
        exception_error (Exception): Exception error passed
        error_type (Type[RcrsError], optional): Error class to raise. Defaults to RcrsError.

    Raises:
        RcrsError: error_type built from both messages
    """

    raise error_type(
        "{error_message}\n\nException: {exception_error}".format(
            error_message=error_message, exception_error=exception_error
        )
    ) from (exception_error if isinstance(exception_error, BaseException) else None)


def slugify(value: str, allow_unicode: bool = False) -> str:
    """
    Django's function for sanitizing strings, modified to produce identifiers usable as
    variable names in formulas: case is kept, dashes and whitespace become underscores and a
    leading digit is prefixed with an underscore.

    Taken from https://github.com/django/django/blob/master/django/utils/text.py

    Args:
        value (str): input string
        allow_unicode (bool, optional): Keep unicode letters. Defaults to False.

    Returns:
        str: identifier safe string, "_" if nothing survives
    """

    value = str(value)
    if allow_unicode:
        value = unicodedata.normalize("NFKC", value)
    else:
        value = unicodedata.normalize("NFKD", value).encode("ascii", "ignore").decode("ascii")
    value = re.sub(r"[^\w\s-]", "", value)
    value = re.sub(r"[-\s]+", "_", value).strip("_")
    if not value:
        return "_"
    if value[0].isdigit():
        value = "_" + value
    return value


def setup_logging(level: str = "WARNING") -> None:
    """
    Configures the root logger once for command line use.  Library code only calls the
    module level logging functions.

    Args:
        level (str, optional): logging level name. Defaults to "WARNING".
    """

    numeric_level = getattr(logging, level.upper(), None)
    if not isinstance(numeric_level, int):
        raise ValueError(f"Unknown log level {level}")
    logging.basicConfig(level=numeric_level, format=LOG_FORMAT, stream=sys.stderr, force=True)
