"""Python access to the schemaprobe core: literal transcription, prompt
composition, verdict and guard parsing, metrics and the command line."""

import functools
import json

from . import _core

__all__ = [
    "SchemaprobeError",
    "transcribe_literals",
    "unescape_literal",
    "render_schema_snippet",
    "render_schema_spec",
    "compose",
    "parse_verdict",
    "parse_guard_output",
    "guard_transcriber_only",
    "guard_metrics",
    "store_summary",
    "planned_jobs",
    "run_cli",
]


class SchemaprobeError(Exception):
    """Raised for every library error; `kind` is the stable error name."""

    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


def _translated(fn):
    @functools.wraps(fn)
    def call(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _core.Error as e:
            kind, message = e.args if len(e.args) == 2 else ("Error", str(e))
            raise SchemaprobeError(kind, message) from None

    return call


@_translated
def transcribe_literals(text):
    """Fragments of `text` as dicts with text, kind, begin, end."""
    return json.loads(_core.transcribe_literals(text))


@_translated
def unescape_literal(raw):
    return _core.unescape_literal(raw)


@_translated
def render_schema_snippet(task, steps=5, schema_spec=None):
    """Fenced schema instance holding `task`; the core schema when no spec is given."""
    return _core.render_schema_snippet(schema_spec, steps, task)


@_translated
def render_schema_spec(schema_spec=None):
    return _core.render_schema_spec(schema_spec)


@_translated
def compose(template_json, task_id, category, goal, steps=5, variant="Full", schema_spec=None):
    return json.loads(_core.compose(template_json, schema_spec, task_id, category, goal, steps, variant))


@_translated
def parse_verdict(text):
    return json.loads(_core.parse_verdict(text))


@_translated
def parse_guard_output(reply):
    return json.loads(_core.parse_guard_output(reply))


@_translated
def guard_transcriber_only(prompt, terms=()):
    return json.loads(_core.guard_transcriber_only(prompt, list(terms)))


@_translated
def guard_metrics(positives, flagged_positives, negatives, flagged_negatives):
    return json.loads(_core.guard_metrics(positives, flagged_positives, negatives, flagged_negatives))


@_translated
def store_summary(store_dir, blocked="refusal", ablation=False):
    """The summary document for a judged run directory."""
    return json.loads(_core.store_summary(str(store_dir), blocked, ablation))


@_translated
def planned_jobs(manifest_path):
    return _core.planned_jobs(str(manifest_path))


def run_cli(args, stdin_text=""):
    """Runs one schemaprobe command in-process; returns (exit_code, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args], stdin_text)
