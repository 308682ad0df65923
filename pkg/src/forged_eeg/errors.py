"""Exception hierarchy.

Every error raised by the package derives from :class:`ForgedEEGError`.
Errors that describe bad argument values also derive from ``ValueError`` so
that scikit-learn style callers catching ``ValueError`` keep working.
"""


class ForgedEEGError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(ForgedEEGError, ValueError):
    pass


class NonFinite(ForgedEEGError, ValueError):
    def __init__(self, channel, sample):
        self.channel = int(channel)
        self.sample = int(sample)
        super().__init__(f"non-finite sample at (channel {self.channel}, sample {self.sample})")


class BadRate(ForgedEEGError, ValueError):
    pass


class EpochTooLong(ForgedEEGError, ValueError):
    pass


class BadMagic(ForgedEEGError, ValueError):
    pass


class TruncatedFile(ForgedEEGError, ValueError):
    def __init__(self, path, expected, actual):
        self.path = str(path)
        self.expected = int(expected)
        self.actual = int(actual)
        super().__init__(f"{self.path}: expected {self.expected} bytes, found {self.actual}")


class MixedRates(ForgedEEGError, ValueError):
    pass


class RangeOverflow(ForgedEEGError, ValueError):
    pass


class BadSpec(ForgedEEGError, ValueError):
    pass


class BadBand(ForgedEEGError, ValueError):
    pass


class TooShort(ForgedEEGError, ValueError):
    pass


class RankDeficient(ForgedEEGError, ValueError):
    pass


class BadIndex(ForgedEEGError, IndexError):
    pass


class EvenLength(ForgedEEGError, ValueError):
    pass


class TooFewChannels(ForgedEEGError, ValueError):
    pass


class DegenerateInput(ForgedEEGError, ValueError):
    pass


class BadLabel(ForgedEEGError, ValueError):
    pass


class EmptyDataset(ForgedEEGError, ValueError):
    pass


class TooFewSubjects(ForgedEEGError, ValueError):
    pass


class SingleClass(ForgedEEGError, ValueError):
    pass


class EmptyPredictions(ForgedEEGError, ValueError):
    pass


class FoldFailed(ForgedEEGError):
    def __init__(self, subject_id, cause):
        self.subject_id = subject_id
        self.cause = cause
        super().__init__(f"fold for test subject {subject_id!r} failed: {cause}")


class UnknownCommand(ForgedEEGError):
    pass


class BadFlag(ForgedEEGError):
    def __init__(self, token, reason=""):
        self.token = token
        msg = f"bad flag {token!r}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class NoConvergenceWarning(UserWarning):
    """FastICA hit its iteration cap; the returned decomposition is partial."""
