"""EasyList network-rule parsing.

Handles the network-rule subset used for image labeling: pattern tokens
(literals, ``*``, ``^``, ``||``, ``|``), ``@@`` exceptions, and the
option subset {image, ~image, third-party, ~third-party, domain=}. Any
other option flags the whole rule unsupported so it is never partially
applied. Cosmetic (``##``-family) lines and comments are counted and
skipped; nothing a list can contain aborts ingestion.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

# Tokens are tuples: ("literal", text) or single-element kind markers.
DOMAIN_ANCHOR = ("domain-anchor",)
ANCHOR_START = ("anchor-start",)
ANCHOR_END = ("anchor-end",)
WILDCARD = ("wildcard",)
SEPARATOR = ("separator",)

# ^ matches any character that is not alphanumeric or _ - . %, or the
# end of the url.
_SEPARATOR_RE = r"(?:[^0-9A-Za-z_.\-%]|$)"
# || anchors immediately after the scheme or at a "." label boundary
# inside the host, so "||ad.com" can never match "myad.com".
_DOMAIN_ANCHOR_RE = r"^[a-z][a-z0-9+.\-]*://(?:[^/?#]*\.)?"

_OPTION_SHAPE = re.compile(r"^~?[A-Za-z][A-Za-z0-9-]*(=.*)?$")

_CSS_MARKERS = ("#@#", "#?#", "#$#", "##")


def _tokenize(pattern: str) -> tuple[tuple, ...]:
    tokens: list[tuple] = []
    i = 0
    if pattern.startswith("||"):
        tokens.append(DOMAIN_ANCHOR)
        i = 2
    elif pattern.startswith("|"):
        tokens.append(ANCHOR_START)
        i = 1
    body = pattern[i:]
    end_anchor = body.endswith("|")
    if end_anchor:
        body = body[:-1]
    literal: list[str] = []
    for ch in body:
        if ch in "*^":
            if literal:
                tokens.append(("literal", "".join(literal)))
                literal.clear()
            tokens.append(WILDCARD if ch == "*" else SEPARATOR)
        else:
            literal.append(ch)
    if literal:
        tokens.append(("literal", "".join(literal)))
    if end_anchor:
        tokens.append(ANCHOR_END)
    return tuple(tokens)


def render_tokens(tokens: tuple[tuple, ...]) -> str:
    """Inverse of tokenization; parse then render reproduces the pattern."""
    glyph = {
        DOMAIN_ANCHOR: "||",
        ANCHOR_START: "|",
        ANCHOR_END: "|",
        WILDCARD: "*",
        SEPARATOR: "^",
    }
    return "".join(tok[1] if tok[0] == "literal" else glyph[tok] for tok in tokens)


def _fold_host_case(tokens: tuple[tuple, ...]) -> tuple[tuple, ...]:
    """Lowercase the scheme/host region of the pattern.

    Match strings carry a lowercased scheme and host but a verbatim
    path, so host matching is case-insensitive and path matching is
    not. Only anchored rules pin down where the host sits; unanchored
    patterns are left fully case-sensitive.
    """
    if not tokens:
        return tokens
    in_host = tokens[0] == DOMAIN_ANCHOR
    await_scheme = tokens[0] == ANCHOR_START
    if not (in_host or await_scheme):
        return tokens
    out: list[tuple] = []
    for tok in tokens:
        if tok[0] != "literal":
            if tok == SEPARATOR:  # host region cannot continue past ^
                in_host = await_scheme = False
            out.append(tok)
            continue
        text = tok[1]
        if await_scheme:
            sep = text.find("://")
            if sep < 0:
                out.append(("literal", text.lower()))
                continue
            path = text.find("/", sep + 3)
            await_scheme = False
            if path < 0:
                out.append(("literal", text.lower()))
                in_host = True
            else:
                out.append(("literal", text[:path].lower() + text[path:]))
            continue
        if in_host:
            path = text.find("/")
            if path < 0:
                out.append(("literal", text.lower()))
            else:
                out.append(("literal", text[:path].lower() + text[path:]))
                in_host = False
            continue
        out.append(tok)
    return tuple(out)


def _regex_for(tokens: tuple[tuple, ...]) -> re.Pattern:
    parts = []
    for tok in _fold_host_case(tokens):
        if tok == DOMAIN_ANCHOR:
            parts.append(_DOMAIN_ANCHOR_RE)
        elif tok == ANCHOR_START:
            parts.append("^")
        elif tok == ANCHOR_END:
            parts.append("$")
        elif tok == WILDCARD:
            parts.append(".*")
        elif tok == SEPARATOR:
            parts.append(_SEPARATOR_RE)
        else:
            parts.append(re.escape(tok[1]))
    return re.compile("".join(parts))


@dataclass(frozen=True)
class FilterRule:
    """One parsed network rule; unsupported rules stay inert."""

    raw: str
    pattern: str
    exception: bool
    tokens: tuple[tuple, ...]
    resource_image: bool | None = None
    third_party: bool | None = None
    include_domains: tuple[str, ...] = ()
    exclude_domains: tuple[str, ...] = ()
    unsupported: tuple[str, ...] = ()
    regex: re.Pattern = field(repr=False, compare=False, default=None)

    @property
    def is_supported(self) -> bool:
        return not self.unsupported


def _split_options(raw: str) -> tuple[str, list[str]]:
    if "$" not in raw:
        return raw, []
    pattern, opts = raw.rsplit("$", 1)
    pieces = opts.split(",") if opts else [""]
    if all(_OPTION_SHAPE.match(p) for p in pieces):
        return pattern, pieces
    # the $ belongs to the pattern itself
    return raw, []


def parse_rule(line: str) -> FilterRule:
    """Parse one network-rule line. Never raises; unsupported constructs
    flag the rule instead."""
    raw = line
    exception = line.startswith("@@")
    if exception:
        line = line[2:]
    pattern, options = _split_options(line)

    resource_image: bool | None = None
    third_party: bool | None = None
    include: list[str] = []
    exclude: list[str] = []
    unsupported: list[str] = []
    for opt in options:
        name, eq, value = opt.partition("=")
        key = name.lower()
        if eq:
            entries = [d for d in value.split("|") if d] if key == "domain" else []
            if key != "domain" or not entries:
                unsupported.append(opt)
            for entry in entries:
                (exclude if entry.startswith("~") else include).append(
                    entry.lstrip("~").lower()
                )
        elif key == "image":
            resource_image = True
        elif key == "~image":
            resource_image = False
        elif key == "third-party":
            third_party = True
        elif key == "~third-party":
            third_party = False
        else:
            unsupported.append(opt)

    if len(pattern) > 1 and pattern.startswith("/") and pattern.endswith("/"):
        # full-regex rules are outside the supported subset
        unsupported.append("regex-pattern")

    tokens = _tokenize(pattern)
    return FilterRule(
        raw=raw,
        pattern=pattern,
        exception=exception,
        tokens=tokens,
        resource_image=resource_image,
        third_party=third_party,
        include_domains=tuple(include),
        exclude_domains=tuple(exclude),
        unsupported=tuple(unsupported),
        regex=_regex_for(tokens),
    )


@dataclass(frozen=True)
class ParseCounts:
    lines: int = 0
    block: int = 0
    exception: int = 0
    comments: int = 0
    css: int = 0
    unsupported: int = 0
    blank: int = 0

    def total(self) -> int:
        return (self.block + self.exception + self.comments + self.css
                + self.unsupported + self.blank)


@dataclass(frozen=True)
class RuleSet:
    """Immutable parsed list; the matching procedure is pure."""

    block_rules: tuple[FilterRule, ...]
    exception_rules: tuple[FilterRule, ...]
    unsupported_rules: tuple[FilterRule, ...]
    counts: ParseCounts

    def __len__(self) -> int:
        return len(self.block_rules) + len(self.exception_rules)


def parse_list(text: str) -> RuleSet:
    """Parse filter-list text. Total: every line lands in exactly one
    bucket and nothing aborts ingestion."""
    block: list[FilterRule] = []
    exception: list[FilterRule] = []
    unsupported: list[FilterRule] = []
    comments = css = blank = 0
    lines = text.splitlines()
    for line in lines:
        stripped = line.strip()
        if not stripped:
            blank += 1
        elif stripped.startswith("!") or stripped.startswith("["):
            comments += 1
        elif any(marker in stripped for marker in _CSS_MARKERS):
            css += 1
        else:
            rule = parse_rule(stripped)
            if not rule.is_supported:
                unsupported.append(rule)
            elif rule.exception:
                exception.append(rule)
            else:
                block.append(rule)
    counts = ParseCounts(
        lines=len(lines),
        block=len(block),
        exception=len(exception),
        comments=comments,
        css=css,
        unsupported=len(unsupported),
        blank=blank,
    )
    return RuleSet(tuple(block), tuple(exception), tuple(unsupported), counts)
