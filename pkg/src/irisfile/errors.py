"""Exception hierarchy for the container toolkit.

Programmer contract violations (bad arguments, misuse of reserved
ranges) raise the builtin ValueError/IndexError; everything rooted in
the *content* of a file derives from IrisFileError.
"""

from __future__ import annotations


class IrisFileError(Exception):
    """Base class for problems with a container file."""


class FormatError(IrisFileError):
    """A block or field failed its structural checks."""


class OpenError(FormatError):
    """A file was rejected while opening; carries the validation report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class CapacityError(IrisFileError):
    """A file exceeds what this host or writer can address."""


class CodecUnavailableError(IrisFileError):
    """No codec registered for the slide's encoding format."""


class DecodeError(IrisFileError):
    """A tile or image payload could not be decoded."""


class EncodeError(IrisFileError):
    """A source tile or codec failed during encoding."""


class UnrecoverableError(IrisFileError):
    """A damaged file retains too little structure to salvage."""
