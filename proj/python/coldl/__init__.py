"""Column-oriented Datalog materialization."""

from ._coldl import (
    ArityError,
    Error,
    InputError,
    Options,
    ParseError,
    ResourceError,
    SafetyError,
    Session,
)

__all__ = [
    "ArityError",
    "Error",
    "InputError",
    "Options",
    "ParseError",
    "ResourceError",
    "SafetyError",
    "Session",
    "materialize",
]


def materialize(rules, facts=None, **options):
    """Evaluate `rules` over `facts` ({predicate: [tuple of str, ...]}) and return the session."""
    opts = Options()
    for key, value in options.items():
        if not hasattr(opts, key):
            raise TypeError(f"unknown option {key!r}")
        setattr(opts, key, value)
    session = Session(rules, {k: [list(map(str, row)) for row in v] for k, v in (facts or {}).items()})
    session.run(opts)
    return session
