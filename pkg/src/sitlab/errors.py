"""Exception types raised across the package."""


class SitlabError(Exception):
    pass


class InvalidConfig(SitlabError, ValueError):
    pass


class ShapeMismatch(SitlabError, ValueError):
    pass


class ZeroVector(SitlabError, ValueError):
    pass


class EmptyInput(SitlabError, ValueError):
    pass


class EmptyClassSet(SitlabError, ValueError):
    pass


class MissingPositive(SitlabError, KeyError):
    pass


class ConfigMismatch(SitlabError, ValueError):
    pass


class InvalidCurve(SitlabError, ValueError):
    pass


class EmptyCurve(InvalidCurve):
    pass


class ParseError(SitlabError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(SitlabError, ValueError):
    """Bad experiment config; ``field`` is the dotted path of the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class MissingArtifact(SitlabError, FileNotFoundError):
    pass


class SeedMismatch(SitlabError, ValueError):
    pass
