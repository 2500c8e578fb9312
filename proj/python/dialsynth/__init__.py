"""Synthetic task-oriented dialogue generation and in-context DST evaluation."""

import json

from . import _dialsynth
from ._dialsynth import (
    CredentialError,
    ParseError,
    ValidationError,
    __version__,
    apportion,
    builtin_spec_names,
    compose,
    episodes_from_corpus,
    estimate_cost,
    export_schema,
    export_templates,
    export_transitions,
    is_valid_transition,
    roundtrip_corpus,
    run_cli,
    tf_cosine,
    validate_corpus,
)


def stats(corpus):
    return json.loads(_dialsynth.stats(corpus))


def evaluate(episodes, predict, pool=None, mode="few_shot_retrieval", k=10, seed=0,
             schema_path=None, transcript=False):
    """Run the JGA evaluator; `predict(prompt)` returns the model completion."""
    return json.loads(_dialsynth.evaluate(episodes, pool=pool, predict=predict, mode=mode, k=k,
                                          seed=seed, schema_path=schema_path, transcript=transcript))


def read_samples(corpus):
    """Sample records of a corpus (header line dropped)."""
    lines = [json.loads(line) for line in corpus.splitlines() if line.strip()]
    return lines[1:]
