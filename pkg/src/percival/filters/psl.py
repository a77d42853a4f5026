"""Registrable-domain extraction over a bundled public-suffix snapshot.

Third-party determination compares the registrable domain (public suffix
plus one label) of the request host against the document's. The suffix
list is a pinned snapshot shipped with the package so decisions do not
drift with the live list; the standard match algorithm is implemented in
full (longest match, ``*.`` wildcards, ``!`` exceptions, implicit ``*``).
"""

from __future__ import annotations

import functools
import importlib.resources
import ipaddress

_SNAPSHOT_NAME = "public_suffixes.dat"


def _parse_snapshot(text: str) -> tuple[frozenset[str], frozenset[str], frozenset[str]]:
    plain, wildcard, exception = set(), set(), set()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("//"):
            continue
        if line.startswith("!"):
            exception.add(line[1:])
        elif line.startswith("*."):
            wildcard.add(line[2:])
        else:
            plain.add(line)
    return frozenset(plain), frozenset(wildcard), frozenset(exception)


@functools.lru_cache(maxsize=1)
def _snapshot() -> tuple[frozenset[str], frozenset[str], frozenset[str]]:
    text = (
        importlib.resources.files("percival.filters")
        .joinpath(_SNAPSHOT_NAME)
        .read_text(encoding="utf-8")
    )
    return _parse_snapshot(text)


def _is_ip_literal(host: str) -> bool:
    candidate = host[1:-1] if host.startswith("[") and host.endswith("]") else host
    try:
        ipaddress.ip_address(candidate)
    except ValueError:
        return False
    return True


def public_suffix(host: str) -> str:
    """Longest matching suffix of ``host`` under the snapshot rules.

    Falls back to the last label (the implicit ``*`` rule) when nothing
    matches, so every host has a suffix.
    """
    host = host.lower().rstrip(".")
    labels = host.split(".")
    plain, wildcard, exception = _snapshot()

    # Exception rules win outright: the suffix is the rule minus its
    # leading label.
    for i in range(len(labels)):
        candidate = ".".join(labels[i:])
        if candidate in exception:
            return ".".join(candidate.split(".")[1:])

    best = labels[-1]
    for i in range(len(labels) - 1, -1, -1):
        candidate = ".".join(labels[i:])
        if candidate in plain and len(candidate) > len(best):
            best = candidate
        # "*.ck" covers one extra label in front of "ck"
        if i > 0 and candidate in wildcard:
            widened = ".".join(labels[i - 1 :])
            if len(widened) > len(best):
                best = widened
    return best


def registrable_domain(host: str) -> str:
    """Public suffix plus one label; the unit third-party checks compare.

    IP literals and hosts that are themselves a public suffix are
    returned unchanged so the comparison degrades to exact-host equality.
    """
    host = host.lower().rstrip(".")
    if not host or _is_ip_literal(host):
        return host
    suffix = public_suffix(host)
    if host == suffix:
        return host
    prefix = host[: -(len(suffix) + 1)]
    return prefix.rsplit(".", 1)[-1] + "." + suffix


def same_site(host_a: str, host_b: str) -> bool:
    return registrable_domain(host_a) == registrable_domain(host_b)
