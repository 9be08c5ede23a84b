"""Deterministic message text grammar.

The hermetic stand-in for a live text model: composes SMS-sized message
drafts from [attribution][framing clause][call to action], selected by
strategy tags, linguistic register, and a variation index. Same inputs,
same text, every time.

The grammar cannot emit a forbidden marketing token ("expire", "last
chance", ...) because no clause contains one; the constraint checker
still verifies every draft independently.
"""

from __future__ import annotations

from enum import Enum


class UnknownTag(ValueError):
    def __init__(self, tag: str):
        super().__init__(f"no framing clauses for tag {tag!r}")
        self.tag = tag


class Register(str, Enum):
    FORMAL = "formal"
    ACTION_ORIENTED = "action_oriented"
    PERSONAL_HEALTH = "personal_health"


ATTRIBUTIONS = (
    "Dr. Kristen Johnson:",
    "Dr. Kristen Johnson's office:",
)

# Framing clauses per strategy tag. Lowercase fragments; the composer
# stitches them after the attribution.
_CLAUSES: dict[str, tuple[str, ...]] = {
    "authority": (
        "your provider prepared new prescription details",
        "new prescription details from your provider",
        "your care team sent prescription details",
    ),
    "urgency": (
        "new Rx details are ready for prompt review",
        "your new prescription is ready today",
        "fresh prescription details await your review",
    ),
    "social_proof": (
        "most patients review their Rx details right away",
        "patients like you find this review useful",
    ),
    "gain_framing": (
        "better health starts with reviewing your Rx",
        "reviewing your Rx supports your health goals",
    ),
    "task_completion": (
        "final step from your visit",
        "complete your visit by reviewing your prescription",
        "one remaining step from your visit",
    ),
    "efficiency": (
        "a quick prescription review",
        "your Rx review takes under a minute",
    ),
    "personalization": (
        "prescription details prepared for you",
        "your personalized Rx details are ready",
    ),
    "reciprocity": (
        "your prescription was prepared for you, thank you for reviewing",
        "we prepared your Rx details, thank you for taking a look",
    ),
    "clarity": (
        "your new prescription details need review",
        "new prescription details to review",
    ),
    "identity": (
        "as a valued patient, your Rx details are ready",
        "for our patients: new Rx details are ready",
    ),
    "emotion": (
        "your health matters, new Rx details are ready",
        "caring for your health starts with your new Rx",
    ),
    "progress": (
        "your care plan is moving forward",
        "your wellness journey continues with this review",
    ),
    "future_self": (
        "your future self will appreciate this review",
        "a small step today for your health tomorrow",
    ),
    "commitment": (
        "ready to review your prescription details",
        "you planned this visit, the review completes it",
    ),
    "default": (
        "your prescription details are ready",
        "new prescription details are available",
    ),
}

_CTAS: dict[Register, tuple[str, ...]] = {
    Register.FORMAL: (
        "Please review your prescription below.",
        "Kindly review the details below.",
    ),
    Register.ACTION_ORIENTED: (
        "Review now.",
        "Tap below to review.",
        "Complete your review today.",
    ),
    Register.PERSONAL_HEALTH: (
        "Take a moment for your health and review.",
        "Review when you are ready today.",
    ),
}


def compose(tags: tuple[str, ...], register: Register, variation: int = 0) -> str:
    """Assemble one message draft. Deterministic in (tags, register, variation)."""
    if not tags:
        raise UnknownTag("<empty tag set>")
    for tag in tags:
        if tag not in _CLAUSES:
            raise UnknownTag(tag)
    attribution = ATTRIBUTIONS[variation % len(ATTRIBUTIONS)]
    primary = tags[0]
    clauses = _CLAUSES[primary]
    clause = clauses[variation % len(clauses)]
    extra = ""
    if len(tags) > 1:
        second = _CLAUSES[tags[1]]
        fragment = second[(variation // len(clauses)) % len(second)]
        extra = f" - {fragment}"
    cta = _CTAS[register][variation % len(_CTAS[register])]
    text = f"{attribution} {clause}{extra}. {cta}"
    # grammar clauses are short; trim the secondary fragment if a long
    # combination ever crosses the SMS budget
    if len(text) > 160 and extra:
        text = f"{attribution} {clause}. {cta}"
    return text
