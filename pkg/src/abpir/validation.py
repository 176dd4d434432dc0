"""Input validation shared by the solver, compiler, estimator and CLI."""

from __future__ import annotations

from collections.abc import Iterable


class InvalidInstanceError(ValueError):
    pass


def check_instance(N, K, D) -> tuple[int, int, int]:
    """Coerce and validate ``(N, K, D)``; returns plain ints."""
    try:
        N, K, D = int(N), int(K), int(D)
    except (TypeError, ValueError) as exc:
        raise InvalidInstanceError(f"N, K, D must be integers: {exc}") from None
    if N < 2:
        raise InvalidInstanceError(f"need at least 2 servers, got N={N}")
    if K < 1:
        raise InvalidInstanceError(f"need at least 1 message, got K={K}")
    if not 1 <= D <= K:
        raise InvalidInstanceError(f"need 1 <= D <= K, got D={D}, K={K}")
    return N, K, D


def check_demand_set(W: Iterable[int] | str, K: int, D: int) -> tuple[int, ...]:
    """Validate a 1-based demand set and return it as a sorted tuple.

    Strings are parsed as comma-separated 1-based indices (``"1,2"``).
    """
    if isinstance(W, str):
        try:
            items = [int(tok) for tok in W.split(",") if tok.strip()]
        except ValueError:
            raise InvalidInstanceError(f"cannot parse demand set {W!r}") from None
    else:
        items = [int(w) for w in W]
    if len(set(items)) != len(items):
        raise InvalidInstanceError(f"demand set has repeated indices: {items}")
    if len(items) != D:
        raise InvalidInstanceError(f"demand set must have D={D} entries, got {len(items)}")
    bad = [w for w in items if not 1 <= w <= K]
    if bad:
        raise InvalidInstanceError(f"demand indices out of range [1, {K}]: {bad}")
    return tuple(sorted(items))


def parse_range(text: str) -> range:
    """Parse ``"a..b"`` (inclusive) or a single integer ``"a"``."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
    else:
        lo = hi = int(text)
    if hi < lo:
        raise ValueError(f"empty range {text!r}")
    return range(lo, hi + 1)
