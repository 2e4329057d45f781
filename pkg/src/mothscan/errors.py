"""Exception types shared across the package.

InputError covers everything a caller can fix: bad parameters, malformed
files, out-of-bounds geometry. The CLI maps it to exit code 1; anything
else is an internal error and exits 2.
"""


class InputError(ValueError):
    """Invalid user input: bad parameter, malformed file, or broken invariant."""


class DecodeError(InputError):
    """An image file could not be decoded."""
