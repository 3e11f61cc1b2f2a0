"""Exception hierarchy shared by all sgpkit modules.

The CLI maps any SgpKitError to exit code 1 (validation/parse failure);
everything else is a genuine bug and propagates.
"""


class SgpKitError(Exception):
    """Base class for all errors raised by sgpkit."""


class InvariantError(SgpKitError):
    """A value violates one of its documented invariants."""


class FormatError(SgpKitError):
    """A file on disk is malformed or does not match its declared format."""


class ContractError(SgpKitError):
    """An operation was called with arguments outside its contract."""


class ConfigError(SgpKitError):
    """A configuration value, key, or whitelist entry is invalid."""
