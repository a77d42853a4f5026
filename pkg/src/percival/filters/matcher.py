"""Request matching against a parsed rule set.

Decision procedure: a request is blocked iff at least one supported
block rule matches it and no exception rule does. Matching is pure and
thread-safe; rule options narrow applicability before the pattern is
tried.
"""

from __future__ import annotations

from dataclasses import dataclass
from urllib.parse import urlsplit

from .parser import FilterRule, RuleSet
from .psl import same_site


class MalformedUrlError(ValueError):
    """URL lacks a scheme or host; callers drop these during ingestion."""


def _split_checked(url: str):
    try:
        parts = urlsplit(url)
    except ValueError as exc:
        raise MalformedUrlError(f"unparseable url: {url!r}") from exc
    if not parts.scheme or not parts.netloc or parts.hostname in (None, ""):
        raise MalformedUrlError(f"url needs scheme and host: {url!r}")
    return parts


def match_string(url: str) -> str:
    """Canonical text the pattern regexes run against: lowercased scheme
    and authority, verbatim path and query, fragment dropped."""
    parts = _split_checked(url)
    text = f"{parts.scheme.lower()}://{parts.netloc.lower()}{parts.path}"
    if parts.query:
        text += f"?{parts.query}"
    return text


@dataclass(frozen=True)
class RequestContext:
    url: str
    document_domain: str
    resource_type: str = "other"

    def __post_init__(self):
        if self.resource_type not in ("image", "other"):
            raise ValueError(
                f"resource_type must be 'image' or 'other', got {self.resource_type!r}"
            )
        _split_checked(self.url)


@dataclass(frozen=True)
class Decision:
    blocked: bool
    # the block rule that fired, or the exception that overrode one;
    # None when nothing matched
    matched_rule: str | None = None


def _domain_covers(entry: str, document_domain: str) -> bool:
    return document_domain == entry or document_domain.endswith("." + entry)


def _options_apply(rule: FilterRule, host: str, document_domain: str,
                   resource_type: str) -> bool:
    if rule.resource_image is not None:
        if (resource_type == "image") != rule.resource_image:
            return False
    if rule.third_party is not None:
        if same_site(host, document_domain) == rule.third_party:
            return False
    if rule.exclude_domains:
        if any(_domain_covers(e, document_domain) for e in rule.exclude_domains):
            return False
    if rule.include_domains:
        if not any(_domain_covers(e, document_domain) for e in rule.include_domains):
            return False
    return True


def _rule_matches(rule: FilterRule, target: str, host: str,
                  document_domain: str, resource_type: str) -> bool:
    if not rule.is_supported:
        return False
    if not _options_apply(rule, host, document_domain, resource_type):
        return False
    return rule.regex.search(target) is not None


def matches(ruleset: RuleSet, ctx: RequestContext) -> Decision:
    """Evaluate the request. Exceptions dominate: any matching exception
    rule clears a matching block rule."""
    parts = _split_checked(ctx.url)
    target = match_string(ctx.url)
    host = parts.hostname.lower()
    doc = ctx.document_domain.lower().rstrip(".")

    hit = None
    for rule in ruleset.block_rules:
        if _rule_matches(rule, target, host, doc, ctx.resource_type):
            hit = rule
            break
    if hit is None:
        return Decision(False, None)
    for rule in ruleset.exception_rules:
        if _rule_matches(rule, target, host, doc, ctx.resource_type):
            return Decision(False, rule.raw)
    return Decision(True, hit.raw)


def label_url(ruleset: RuleSet, ctx: RequestContext) -> str:
    """'ad' iff the request would be blocked, else 'non-ad'."""
    return "ad" if matches(ruleset, ctx).blocked else "non-ad"
