"""Explanation selection, rendering, delivery and external-engine proxying."""

from shine.explain.engine import (
    BlockedInteractionCause,
    DeliveryDecision,
    ExplanationCause,
    ExplanationInstance,
    ExplanationManager,
    FollowUpQueryCause,
    Rating,
    RuleFiredCause,
    TriggerFiredCause,
    UNMATCHED_QUERY_TEXT,
    UserRequestCause,
    render_template,
)
from shine.explain.external import ExternalEngineClient

__all__ = [
    "BlockedInteractionCause",
    "DeliveryDecision",
    "ExplanationCause",
    "ExplanationInstance",
    "ExplanationManager",
    "ExternalEngineClient",
    "FollowUpQueryCause",
    "Rating",
    "RuleFiredCause",
    "TriggerFiredCause",
    "UNMATCHED_QUERY_TEXT",
    "UserRequestCause",
    "render_template",
]
