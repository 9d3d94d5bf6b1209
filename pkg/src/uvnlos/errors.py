"""Exception types shared across the package."""


class UvnlosError(Exception):
    """Base class for all package errors."""


class DomainError(UvnlosError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class DegenerateAzimuth(DomainError):
    """cot(alpha) is undefined at working precision."""


class DegenerateFrame(UvnlosError):
    """A rotating-plane frame has a vanishing normal."""


class UnorderedFrame(UvnlosError):
    """Frame angles cannot be ordered (NaN present)."""


class ZeroScattering(DomainError):
    """The total scattering coefficient is zero."""


class ConfigError(UvnlosError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ValidationError(ConfigError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
