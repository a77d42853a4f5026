"""EasyList network-rule subset: parser, matcher, and public-suffix data."""

from .matcher import (
    Decision,
    MalformedUrlError,
    RequestContext,
    label_url,
    match_string,
    matches,
)
from .parser import (
    FilterRule,
    ParseCounts,
    RuleSet,
    parse_list,
    parse_rule,
    render_tokens,
)
from .psl import public_suffix, registrable_domain, same_site

__all__ = [
    "Decision",
    "FilterRule",
    "MalformedUrlError",
    "ParseCounts",
    "RequestContext",
    "RuleSet",
    "label_url",
    "match_string",
    "matches",
    "parse_list",
    "parse_rule",
    "public_suffix",
    "registrable_domain",
    "render_tokens",
    "same_site",
]
