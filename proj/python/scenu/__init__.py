"""Python access to the scenu scenario-understanding library.

Documents cross the boundary as JSON text; the helpers here decode them.
"""

import json

from . import _core
from ._core import (
    ScenuError,
    classify_directional_relation,
    config_hash,
    occlusion_state,
    rss_longitudinal_safe_distance,
    run_cli,
    surface_distance,
)

__all__ = [
    "ScenuError",
    "anticipate",
    "classify_directional_relation",
    "config_hash",
    "decide",
    "derive",
    "occlusion_state",
    "parse_dsl",
    "rss_longitudinal_safe_distance",
    "run_cli",
    "score",
    "serialize_dsl",
    "surface_distance",
    "validate",
]


def _text(doc):
    if doc is None or isinstance(doc, str):
        return doc
    return json.dumps(doc)


def validate(doc):
    return json.loads(_core.validate(_text(doc)))


def parse_dsl(text):
    return json.loads(_core.parse_dsl(text))


def serialize_dsl(description, anticipation=None):
    return _core.serialize_dsl(_text(description), _text(anticipation))


def derive(log_text, context, overrides=()):
    return json.loads(_core.derive(log_text, _text(context), list(overrides)))


def anticipate(description, overrides=()):
    return json.loads(_core.anticipate(_text(description), list(overrides)))


def score(gt, candidate, gt_anticipation=None, candidate_anticipation=None, overrides=()):
    return json.loads(
        _core.score(
            gt=_text(gt),
            gt_anticipation=_text(gt_anticipation),
            candidate=_text(candidate),
            candidate_anticipation=_text(candidate_anticipation),
            overrides=list(overrides),
        )
    )


def decide(description, anticipation=None, task="decision", overrides=()):
    doc = json.loads(_core.decide(_text(description), _text(anticipation), task, list(overrides)))
    return doc["actions"]
