"""Prompt builders and response parsers for the four agent roles.

Each agent call is a pure request-builder plus a pure response-parser
around a chat backend, so identical inputs always produce byte-identical
prompts (a prerequisite for record/replay testing).

The response grammar is a labeled-line format: known labels at line start
("Thought:", "Score:", "Should Evolve:", ...) matched case-insensitively,
with a field's content running until the next known label. List-valued
fields accept bracketed Python/JSON-style lists or bare comma-separated
text. Parsers fail loudly on anything outside this grammar; the only
silent repair is mapping an unknown error type onto ``other``.
"""

from __future__ import annotations

import ast
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Sequence

from maple.backend import AgentRole, ChatBackend, ChatRequest
from maple.errors import ParseError
from maple.memory import ErrorType, MemoryNote, coerce_error_type
from maple.table import Table, TableState, serialize_markdown

logger = logging.getLogger(__name__)

FULL_SCORE = 6

# Emitted sentinel uses the space variant; the underscore spelling is
# accepted on input.
NOT_READY = "<NOT READY>"
_NOT_READY_VARIANTS = frozenset({"<NOT READY>", "<NOT_READY>"})

CRITERION_KEYS = ("answer_type", "format", "evidence")
_CRITERION_TITLES = {
    "answer_type": "Answer Type Checking",
    "format": "Format Validation",
    "evidence": "Evidence Grounding",
}


# -- domain types ----------------------------------------------------------


@dataclass(frozen=True)
class SolverStep:
    """One think-act step: thought, action, table block, answer slot."""

    thought: str
    action: str
    intermediate_block: str
    answer: str

    def __post_init__(self):
        if not self.answer:
            raise ValueError("answer must be the sentinel or a concrete answer")

    @property
    def is_ready(self) -> bool:
        return self.answer != NOT_READY

    def to_dict(self) -> dict:
        return {
            "thought": self.thought,
            "action": self.action,
            "intermediate_block": self.intermediate_block,
            "answer": self.answer,
        }


@dataclass
class SolverTrace:
    """Operation history for one reasoning round; steps are append-only."""

    steps: list[SolverStep] = field(default_factory=list)
    round_index: int = 1

    def __post_init__(self):
        if self.round_index < 1:
            raise ValueError("round_index starts at 1")

    def append(self, step: SolverStep) -> None:
        self.steps.append(step)

    def numbered_actions(self) -> str:
        return "\n".join(f"{i}. {s.action}" for i, s in enumerate(self.steps, start=1))


@dataclass(frozen=True)
class CheckerCriterion:
    score: int
    comment: str

    def __post_init__(self):
        if self.score not in (0, 1, 2):
            raise ValueError(f"score out of range: {self.score}")


@dataclass(frozen=True)
class CheckerFeedback:
    """Three scored criteria plus the aggregated summary."""

    criteria: dict
    total_score: int
    final_comments: str

    def __post_init__(self):
        if tuple(self.criteria.keys()) != CRITERION_KEYS:
            raise ValueError(f"criteria must be keyed {CRITERION_KEYS}")
        recomputed = sum(c.score for c in self.criteria.values())
        if self.total_score != recomputed:
            raise ValueError("total_score must equal the sum of criterion scores")

    @property
    def is_accepted(self) -> bool:
        return self.total_score == FULL_SCORE

    def to_dict(self) -> dict:
        return {
            "criteria": {
                k: {"score": c.score, "comment": c.comment}
                for k, c in self.criteria.items()
            },
            "total_score": self.total_score,
            "final_comments": self.final_comments,
        }


@dataclass(frozen=True)
class ReflectionReport:
    diagnosis: str
    improvement_plan: str

    def __post_init__(self):
        if not self.diagnosis or not self.improvement_plan:
            raise ValueError("diagnosis and improvement_plan must be non-empty")

    def to_dict(self) -> dict:
        return {"diagnosis": self.diagnosis, "improvement_plan": self.improvement_plan}


@dataclass(frozen=True)
class EvolutionDecision:
    """Whether and how the memory base should evolve after one insertion."""

    should_evolve: bool
    actions: tuple[str, ...] = ()
    suggested_connections: tuple[str, ...] = ()
    tags_to_update: tuple[str, ...] = ()
    new_context_neighborhood: tuple[str, ...] = ()
    new_tags_neighborhood: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "suggested_connections", tuple(self.suggested_connections))
        object.__setattr__(self, "tags_to_update", tuple(self.tags_to_update))
        object.__setattr__(self, "new_context_neighborhood", tuple(self.new_context_neighborhood))
        object.__setattr__(
            self, "new_tags_neighborhood",
            tuple(tuple(t) for t in self.new_tags_neighborhood),
        )
        unknown = [a for a in self.actions if a not in ("strengthen", "update_neighbor")]
        if unknown:
            raise ValueError(f"unknown evolution action(s): {unknown}")
        if not self.should_evolve:
            collections = (
                self.actions, self.suggested_connections, self.tags_to_update,
                self.new_context_neighborhood, self.new_tags_neighborhood,
            )
            if any(collections):
                raise ValueError("a no-evolve decision must carry empty collections")


# -- templates -------------------------------------------------------------


@lru_cache(maxsize=None)
def _template(name: str) -> Template:
    text = resources.files("maple").joinpath("prompts", f"{name}.txt").read_text("utf-8")
    return Template(text)


def _fill(name: str, **slots) -> str:
    return _template(name).substitute(**slots)


# -- rendering helpers -----------------------------------------------------


def render_note_for_solver(note: MemoryNote) -> str:
    """Compact note view injected into solver prompts."""
    lines = [
        f"Past Question: {note.question}",
        f"Question Type: {note.question_type}",
        f"Required Operations: {', '.join(note.required_operations)}",
        "Correct Reasoning Steps: "
        + " ".join(f"{i}.{s};" for i, s in enumerate(note.correct_steps, start=1)),
    ]
    if note.wrong_steps:
        lines.append(
            "Wrong Steps: "
            + " ".join(f"{i}.{s};" for i, s in enumerate(note.wrong_steps, start=1))
        )
    lines.append(f"Error Type: {note.error_type.value}")
    lines.append(f"Error Reason: {note.error_reason}")
    return "\n".join(lines)


def render_note_full(note: MemoryNote, with_id: bool = False) -> str:
    """Full note view used in archiver evolution prompts."""
    lines = []
    if with_id and note.id:
        lines.append(f"Note ID: {note.id}")
    lines += [
        f"Question ID: {note.question_id}",
        f"Question: {note.question}",
        f"Question Type: {note.question_type}",
        f"Required Operations: {', '.join(note.required_operations)}",
        f"Context: {note.context}",
        f"Tags: {', '.join(note.tags)}",
        f"Keywords: {', '.join(note.keywords)}",
        f"Correct Answer: {note.correct_answer}",
        f"Model Answer: {note.model_answer}",
        "Correct Steps: " + "; ".join(f"- {s}" for s in note.correct_steps),
        "Wrong Steps: " + "; ".join(f"- {s}" for s in note.wrong_steps),
        f"Error Type: {note.error_type.value}",
        f"Error Reason: {note.error_reason}",
    ]
    return "\n".join(lines)


def render_feedback(feedback: CheckerFeedback) -> str:
    blocks = []
    for key in CRITERION_KEYS:
        criterion = feedback.criteria[key]
        blocks.append(
            f"{_CRITERION_TITLES[key]}\nScore: {criterion.score}\n"
            f"Comments: {criterion.comment}"
        )
    blocks.append(
        f"Summary\nTotal Score: {feedback.total_score}\n"
        f"Final Comments: {feedback.final_comments}"
    )
    return "\n\n".join(blocks)


# -- labeled-line parsing --------------------------------------------------


def _label_pattern(label: str) -> re.Pattern:
    # tolerate list bullets, heading hashes and bold markers around labels
    return re.compile(
        r"^\s*(?:[-*•>#]+\s*)*\**\s*" + re.escape(label) + r"\**\s*:\s*(.*)$",
        re.IGNORECASE,
    )


def _header_pattern(title: str) -> re.Pattern:
    return re.compile(
        r"^\s*(?:[-*•>#]+\s*)*\**\s*" + re.escape(title) + r"\**\s*:?\s*$",
        re.IGNORECASE,
    )


def _split_labeled(text: str, labels: Sequence[str]) -> dict[str, str]:
    """Map each label to its content; content runs until the next label line."""
    patterns = [(label, _label_pattern(label)) for label in labels]
    lines = text.splitlines()
    found: list[tuple[int, str, str]] = []
    for i, line in enumerate(lines):
        for label, pattern in patterns:
            m = pattern.match(line)
            if m:
                found.append((i, label, m.group(1)))
                break
    out: dict[str, str] = {}
    for j, (i, label, first) in enumerate(found):
        end = found[j + 1][0] if j + 1 < len(found) else len(lines)
        chunk = [first] + lines[i + 1 : end]
        if label.lower() not in out:
            out[label.lower()] = "\n".join(chunk).strip()
    return out


def _parse_str_list(text: str) -> list[str]:
    s = text.strip()
    if not s or s in ("[]", "[ ]") or s.lower() == "none":
        return []
    if s.startswith("["):
        try:
            value = ast.literal_eval(s)
        except (ValueError, SyntaxError):
            inner = s.strip()[1:-1] if s.endswith("]") else s[1:]
            parts = [p.strip().strip("'\"") for p in inner.split(",")]
            return [p for p in parts if p]
        if isinstance(value, (list, tuple)):
            return [str(v).strip() for v in value if str(v).strip()]
        return [str(value).strip()]
    return [p.strip() for p in s.split(",") if p.strip()]


def _parse_nested_list(text: str) -> list[list[str]]:
    s = text.strip()
    if not s or s in ("[]", "[ ]") or s.lower() == "none":
        return []
    try:
        value = ast.literal_eval(s)
    except (ValueError, SyntaxError) as exc:
        raise ParseError(f"cannot parse nested list: {s!r}") from exc
    if not isinstance(value, (list, tuple)):
        raise ParseError(f"expected a list of lists, got: {s!r}")
    out = []
    for item in value:
        if isinstance(item, (list, tuple)):
            out.append([str(v).strip() for v in item if str(v).strip()])
        else:
            out.append([str(item).strip()])
    return out


def _parse_bool(text: str, field_name: str) -> bool:
    s = text.strip().rstrip(".").lower()
    if s in ("true", "yes"):
        return True
    if s in ("false", "no"):
        return False
    raise ParseError(f"{field_name} must be true or false, got {text!r}")


def _first_int(text: str, context: str) -> int:
    m = re.search(r"-?\d+", text)
    if not m:
        raise ParseError(f"no integer in {context}: {text!r}")
    return int(m.group(0))


# -- solver ----------------------------------------------------------------


def build_solver_request(
    state: TableState,
    question: str,
    trace: SolverTrace,
    remaining: int,
    retrieved: Sequence[MemoryNote] = (),
    reflection: ReflectionReport | None = None,
    decode_params: dict | None = None,
) -> ChatRequest:
    """Assemble the solver prompt.

    Block order: retrieved memories (omitted when empty), attempt counters,
    the current table, the question, this round's action history (omitted
    when empty), and the reflection block (omitted when absent).
    """
    if remaining < 1:
        raise ValueError("remaining attempts must be >= 1")
    parts = []
    if retrieved:
        notes = "\n\n".join(render_note_for_solver(n) for n in retrieved)
        parts.append(_fill("solver_memory", notes=notes))
    parts.append(
        _fill(
            "solver_user",
            attempt=len(trace.steps) + 1,
            remaining=remaining - 1,
            table=serialize_markdown(state.current),
            question=question,
        )
    )
    if trace.steps:
        parts.append(_fill("solver_history", history=trace.numbered_actions()))
    if reflection is not None:
        parts.append(
            _fill(
                "solver_reflection",
                diagnosis=reflection.diagnosis,
                plan=reflection.improvement_plan,
            )
        )
    return ChatRequest(
        agent_role=AgentRole.SOLVER,
        system_text=_template("solver_system").template,
        user_text="".join(parts),
        decode_params=decode_params or {},
    )


_SOLVER_FIELDS = {
    "thought": "thought",
    "action": "action",
    "intermediate table": "intermediate_block",
    "answer": "answer",
}


def parse_solver_response(text: str) -> SolverStep:
    fields = _split_labeled(text, ["Thought", "Action", "Intermediate table", "Answer"])
    for key, name in _SOLVER_FIELDS.items():
        if key not in fields:
            raise ParseError(f"missing field: {name}")
    answer = fields["answer"].strip()
    if not answer:
        raise ParseError("missing field: answer")
    if answer in _NOT_READY_VARIANTS:
        answer = NOT_READY
    block = fields["intermediate table"].strip()
    if not block:
        raise ParseError("missing field: intermediate_block")
    return SolverStep(
        thought=fields["thought"],
        action=fields["action"],
        intermediate_block=block,
        answer=answer,
    )


def solver_call(
    backend: ChatBackend,
    state: TableState,
    question: str,
    trace: SolverTrace,
    remaining: int,
    retrieved: Sequence[MemoryNote] = (),
    reflection: ReflectionReport | None = None,
    decode_params: dict | None = None,
) -> SolverStep:
    request = build_solver_request(
        state, question, trace, remaining, retrieved, reflection, decode_params
    )
    return parse_solver_response(backend.chat(request))


# -- checker ---------------------------------------------------------------


def build_checker_request(
    table: Table, question: str, answer: str, decode_params: dict | None = None
) -> ChatRequest:
    if not answer or answer in _NOT_READY_VARIANTS:
        raise ValueError("checker needs a concrete answer, not a sentinel")
    return ChatRequest(
        agent_role=AgentRole.CHECKER,
        system_text=_template("checker_system").template,
        user_text=_fill(
            "checker_user",
            table=serialize_markdown(table),
            question=question,
            answer=answer,
        ),
        decode_params=decode_params or {},
    )


def parse_checker_response(text: str) -> CheckerFeedback:
    lines = text.splitlines()
    anchors: dict[str, int] = {}
    for i, line in enumerate(lines):
        for key, title in _CRITERION_TITLES.items():
            if key not in anchors and _header_pattern(title).match(line):
                anchors[key] = i
    for key in CRITERION_KEYS:
        if key not in anchors:
            raise ParseError(f"missing criterion: {_CRITERION_TITLES[key]}")

    # the summary block bounds the last criterion's section
    summary_start = len(lines)
    summary_header = _header_pattern("Summary")
    total_label = _label_pattern("Total Score")
    for i, line in enumerate(lines):
        if i > min(anchors.values()) and (summary_header.match(line) or total_label.match(line)):
            summary_start = i
            break
    boundaries = sorted(anchors.values()) + [summary_start, len(lines)]
    criteria = {}
    for key in CRITERION_KEYS:
        start = anchors[key]
        end = min(b for b in boundaries if b > start)
        section = "\n".join(lines[start + 1 : end])
        part = _split_labeled(section, ["Score", "Comments"])
        if "score" not in part:
            raise ParseError(f"missing criterion: {_CRITERION_TITLES[key]} score")
        score = _first_int(part["score"], f"{key} score")
        if score not in (0, 1, 2):
            raise ParseError(f"score out of range for {_CRITERION_TITLES[key]}: {score}")
        criteria[key] = CheckerCriterion(score=score, comment=part.get("comments", ""))

    summary = _split_labeled(text, ["Total Score", "Final Comments"])
    recomputed = sum(c.score for c in criteria.values())
    if "total score" in summary:
        claimed = _first_int(summary["total score"], "total score")
        if claimed != recomputed:
            logger.warning(
                "checker total %d disagrees with criterion sum %d; using the sum",
                claimed, recomputed,
            )
    else:
        logger.warning("checker response lacks a total score; using the criterion sum")
    return CheckerFeedback(
        criteria=criteria,
        total_score=recomputed,
        final_comments=summary.get("final comments", ""),
    )


def checker_call(
    backend: ChatBackend,
    table: Table,
    question: str,
    answer: str,
    decode_params: dict | None = None,
) -> CheckerFeedback:
    request = build_checker_request(table, question, answer, decode_params)
    return parse_checker_response(backend.chat(request))


# -- reflector ---------------------------------------------------------------


def build_reflector_request(
    table: Table,
    question: str,
    trace: SolverTrace,
    answer: str,
    feedback: CheckerFeedback,
    decode_params: dict | None = None,
) -> ChatRequest:
    if feedback.total_score >= FULL_SCORE:
        raise ValueError("reflector must not run on an accepted answer")
    return ChatRequest(
        agent_role=AgentRole.REFLECTOR,
        system_text=_template("reflector_system").template,
        user_text=_fill(
            "reflector_user",
            question=question,
            table=serialize_markdown(table),
            history=trace.numbered_actions() or "(no recorded steps)",
            answer=answer,
            feedback=render_feedback(feedback),
        ),
        decode_params=decode_params or {},
    )


def parse_reflector_response(text: str) -> ReflectionReport:
    fields = _split_labeled(text, ["Diagnosis", "Improvement plan"])
    if "diagnosis" not in fields or not fields["diagnosis"]:
        raise ParseError("missing section: diagnosis")
    if "improvement plan" not in fields or not fields["improvement plan"]:
        raise ParseError("missing section: improvement plan")
    return ReflectionReport(
        diagnosis=fields["diagnosis"], improvement_plan=fields["improvement plan"]
    )


def reflector_call(
    backend: ChatBackend,
    table: Table,
    question: str,
    trace: SolverTrace,
    answer: str,
    feedback: CheckerFeedback,
    decode_params: dict | None = None,
) -> ReflectionReport:
    request = build_reflector_request(table, question, trace, answer, feedback, decode_params)
    return parse_reflector_response(backend.chat(request))


# -- archiver: summarization -------------------------------------------------


def build_archiver_sum_request(
    table: Table,
    question: str,
    model_answer: str,
    ground_truth: str,
    trace: SolverTrace,
    reflection: ReflectionReport | None = None,
    decode_params: dict | None = None,
) -> ChatRequest:
    if not ground_truth:
        raise ValueError("memory summarization requires a ground truth answer")
    user_text = _fill(
        "archiver_sum_user",
        question=question,
        table=serialize_markdown(table),
        model_answer=model_answer,
        ground_truth=ground_truth,
        history=trace.numbered_actions() or "(no recorded steps)",
    )
    if reflection is not None:
        user_text += _fill(
            "archiver_sum_reflection",
            diagnosis=reflection.diagnosis,
            plan=reflection.improvement_plan,
        )
    return ChatRequest(
        agent_role=AgentRole.ARCHIVER_SUM,
        system_text=_template("archiver_sum_system").template,
        user_text=user_text,
        decode_params=decode_params or {},
    )


_SUM_LABELS = [
    "Question Type", "Required Operations", "Context", "Keywords", "Tags",
    "Correct Steps", "Wrong Steps", "Error Type", "Error Reason",
]


def parse_archiver_sum_response(text: str) -> MemoryNote:
    """Parse a summarization response into a content-only, unembedded note."""
    fields = _split_labeled(text, _SUM_LABELS)
    for label in _SUM_LABELS:
        if label.lower() not in fields:
            raise ParseError(f"missing field: {label.lower().replace(' ', '_')}")
    error_type, known = coerce_error_type(fields["error type"])
    if not known:
        logger.warning(
            "unknown error type %r mapped to 'other'", fields["error type"].strip()
        )
    error_reason = fields["error reason"].strip()
    if error_type is ErrorType.NONE:
        if error_reason.lower() not in ("", "none", "n/a"):
            raise ParseError(
                f"error_type is none but error_reason is {error_reason!r}"
            )
        error_reason = "none"
    elif not error_reason:
        raise ParseError(f"error_type {error_type.value} requires an error_reason")
    return MemoryNote(
        question_type=fields["question type"].strip(),
        required_operations=_parse_str_list(fields["required operations"]),
        context=fields["context"].strip(),
        keywords=_parse_str_list(fields["keywords"]),
        tags=_parse_str_list(fields["tags"]),
        correct_steps=_parse_str_list(fields["correct steps"]),
        wrong_steps=_parse_str_list(fields["wrong steps"]),
        error_type=error_type,
        error_reason=error_reason,
    )


def archiver_sum_call(
    backend: ChatBackend,
    table: Table,
    question: str,
    model_answer: str,
    ground_truth: str,
    trace: SolverTrace,
    reflection: ReflectionReport | None = None,
    decode_params: dict | None = None,
) -> MemoryNote:
    request = build_archiver_sum_request(
        table, question, model_answer, ground_truth, trace, reflection, decode_params
    )
    return parse_archiver_sum_response(backend.chat(request))


# -- archiver: evolution -------------------------------------------------------


def build_archiver_evo_request(
    note: MemoryNote,
    neighbors: Sequence[MemoryNote],
    decode_params: dict | None = None,
) -> ChatRequest:
    rendered = (
        "\n\n".join(render_note_full(n, with_id=True) for n in neighbors)
        if neighbors
        else "(none)"
    )
    return ChatRequest(
        agent_role=AgentRole.ARCHIVER_EVO,
        system_text=_template("archiver_evo_system").template,
        user_text=_fill("archiver_evo_user", note=render_note_full(note), neighbors=rendered),
        decode_params=decode_params or {},
    )


_EVO_LABELS = [
    "Should Evolve", "Actions", "Suggested Connections", "Tags to Update",
    "New Context Neighborhood", "New Tags Neighborhood",
]


def parse_archiver_evo_response(text: str) -> EvolutionDecision:
    fields = _split_labeled(text, _EVO_LABELS)
    for label in _EVO_LABELS:
        if label.lower() not in fields:
            raise ParseError(f"missing field: {label.lower().replace(' ', '_')}")
    should_evolve = _parse_bool(fields["should evolve"], "should_evolve")
    actions = _parse_str_list(fields["actions"])
    for action in actions:
        if action not in ("strengthen", "update_neighbor"):
            raise ParseError(f"unknown evolution action: {action!r}")
    try:
        return EvolutionDecision(
            should_evolve=should_evolve,
            actions=tuple(actions),
            suggested_connections=tuple(_parse_str_list(fields["suggested connections"])),
            tags_to_update=tuple(_parse_str_list(fields["tags to update"])),
            new_context_neighborhood=tuple(_parse_str_list(fields["new context neighborhood"])),
            new_tags_neighborhood=tuple(
                tuple(t) for t in _parse_nested_list(fields["new tags neighborhood"])
            ),
        )
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def archiver_evo_call(
    backend: ChatBackend,
    note: MemoryNote,
    neighbors: Sequence[MemoryNote],
    decode_params: dict | None = None,
) -> EvolutionDecision:
    request = build_archiver_evo_request(note, neighbors, decode_params)
    return parse_archiver_evo_response(backend.chat(request))
