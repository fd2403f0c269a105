"""End-to-end runs: select examples, build prompts, complete, parse, score.

``run`` drives one configuration over a test corpus and produces a
report dict that serializes byte-identically across runs when the
backend is replay. ``compare`` runs a code-style and a text-style
configuration over the same corpus and reports the F1 differences.
Reports are written atomically (temp file then rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

from . import client as client_mod
from .client import (
    BackendError,
    CompletionRequest,
    FixtureMissError,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    request_digest,
)
from .corpus import (
    CorpusError,
    Dataset,
    load_corpus,
    select_non_sibling,
    select_same_type,
    select_sibling,
    split_hierarchy,
)
from .emitter import EmitterOptions, PromptStyle, assemble_prompt
from .ontology import Ontology, derive_class_name, load_ontology
from .parsing import ParsedEvent, parse_completion, parse_text_completion
from .scoring import HeadFinder, score


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


class MissingFixtures(BackendError):
    """Replay run hit prompts with no recorded response."""

    def __init__(self, digests: list[str]):
        listing = "\n".join(f"  {d}" for d in digests)
        super().__init__(f"{len(digests)} request(s) missing from fixtures:\n{listing}")
        self.digests = digests


class ReportError(Exception):
    """A stored report fails its internal consistency re-check."""


@dataclass(frozen=True)
class RunConfig:
    ontology_path: str
    train_path: str
    test_path: str
    prompt_style: str = "code"  # code | t1 | t2
    k: int = 1
    selection_mode: str = "same"  # same | sibling | non_sibling
    seed: int = 0
    mark_trigger: bool = True
    include_description: bool = True
    include_type_annotation: bool = True
    include_hierarchy: bool = True
    include_keywords: bool = False
    amr_path: str | None = None
    backend: str = "replay"  # replay | http
    record: bool = False
    fixture_path: str | None = None
    endpoint: str | None = None
    model_id: str = "fixture-model"
    max_new_tokens: int = 128
    temperature: float = 0.0
    max_prompt_chars: int | None = None
    max_in_flight: int = 4
    output_path: str | None = None

    def validate(self) -> None:
        try:
            PromptStyle(self.prompt_style)
        except ValueError:
            raise ConfigError(f"unknown prompt style {self.prompt_style!r}") from None
        if self.selection_mode not in ("same", "sibling", "non_sibling"):
            raise ConfigError(f"unknown selection mode {self.selection_mode!r}")
        if self.k < 0:
            raise ConfigError("k must be >= 0")
        if self.max_new_tokens <= 0:
            raise ConfigError("max_new_tokens must be positive")
        if self.max_prompt_chars is not None and self.max_prompt_chars <= 0:
            raise ConfigError("max_prompt_chars must be positive")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if self.backend == "replay":
            if self.fixture_path is None:
                raise ConfigError("replay backend requires fixture_path")
            if self.record:
                raise ConfigError("recording requires the http backend")
        elif self.backend == "http":
            if self.endpoint is None:
                raise ConfigError("http backend requires endpoint")
            if self.record and self.fixture_path is None:
                raise ConfigError("recording requires fixture_path")
        else:
            raise ConfigError(f"unknown backend {self.backend!r}")


def _build_backend(cfg: RunConfig):
    if cfg.backend == "replay":
        try:
            return ReplayBackend(cfg.fixture_path)
        except BackendError as exc:
            # unreadable or corrupt fixture file is a configuration problem
            raise ConfigError(str(exc)) from exc
    backend = HttpBackend(endpoint=cfg.endpoint)
    if cfg.record:
        backend = RecordingBackend(backend, cfg.fixture_path)
    return backend


def load_amr(path: str) -> dict[str, str]:
    """Read {id, amr} records keyed by instance id."""
    table: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    instance_id, amr = record["id"], record["amr"]
                except (ValueError, KeyError, TypeError) as exc:
                    raise ConfigError(f"{path}:{lineno}: bad record: {exc}") from exc
                if not isinstance(amr, str) or not amr.strip():
                    raise ConfigError(f"{path}:{lineno}: empty amr for {instance_id!r}")
                table[instance_id] = amr
    except OSError as exc:
        raise ConfigError(f"cannot read amr file {path}: {exc}") from exc
    return table


def _select_examples(cfg: RunConfig, train: Dataset, ontology: Ontology, event_type: str):
    if cfg.selection_mode == "same":
        return select_same_type(train, event_type, cfg.k)
    if cfg.selection_mode == "sibling":
        return select_sibling(train, ontology, event_type, cfg.k)
    return select_non_sibling(train, ontology, event_type, cfg.k, cfg.seed)


def _config_echo(cfg: RunConfig) -> dict:
    echo = asdict(cfg)
    echo.pop("output_path")
    return echo


def _parsed_to_dict(parsed: ParsedEvent) -> dict:
    return {
        "roles": {
            role: [
                {"entity_type": m.entity_type, "surface": m.surface} for m in mentions
            ]
            for role, mentions in parsed.roles.items()
        },
        "diagnostics": [
            {"kind": d.kind.value, "detail": d.detail} for d in parsed.diagnostics
        ],
    }


def _parse(style: PromptStyle, text: str, ontology: Ontology, event_type: str) -> ParsedEvent:
    if style is PromptStyle.CODE:
        return parse_completion(text, ontology, event_type)
    return parse_text_completion(style.value, text, ontology, event_type)


def run(cfg: RunConfig, hf: HeadFinder | None = None) -> dict:
    """Execute one configuration end to end and return the report dict."""
    cfg.validate()
    style = PromptStyle(cfg.prompt_style)
    try:
        ontology = load_ontology(cfg.ontology_path)
        train = load_corpus(cfg.train_path, "train")
        test = load_corpus(cfg.test_path, "test")
    except OSError as exc:
        raise ConfigError(str(exc)) from exc

    if cfg.selection_mode in ("sibling", "non_sibling"):
        split = split_hierarchy(ontology, train)
        if not any(entry.test_children for entry in split.values()):
            raise ConfigError(
                f"selection mode {cfg.selection_mode!r} needs a parent type "
                "with at least two children carrying data"
            )

    amr_table = load_amr(cfg.amr_path) if cfg.amr_path else {}
    base_opts = EmitterOptions(
        mark_trigger=cfg.mark_trigger,
        include_description=cfg.include_description,
        include_type_annotation=cfg.include_type_annotation,
        include_hierarchy=cfg.include_hierarchy,
        include_keywords=cfg.include_keywords,
        prompt_style=style,
    )

    shortfall: dict[str, dict] = {}
    skipped: list[dict] = []
    tasks: list[dict] = []
    for inst in test.instances:
        try:
            examples = _select_examples(cfg, train, ontology, inst.event_type)
        except CorpusError as exc:
            raise ConfigError(str(exc)) from exc
        cls = derive_class_name(inst.event_type)
        if len(examples) < cfg.k:
            note = shortfall.setdefault(cls, {"requested": cfg.k, "available": len(examples)})
            note["available"] = max(note["available"], len(examples))
        opts = replace(base_opts, amr_text=amr_table.get(inst.id))
        bundle = assemble_prompt(ontology, inst.event_type, examples, inst, opts)
        if cfg.max_prompt_chars is not None and len(bundle.text) > cfg.max_prompt_chars:
            skipped.append({"id": inst.id, "prompt_chars": len(bundle.text)})
            continue
        request = CompletionRequest(
            prompt=bundle.text,
            max_new_tokens=cfg.max_new_tokens,
            temperature=cfg.temperature,
            stop_patterns=bundle.stop_patterns,
            model_id=cfg.model_id,
        )
        tasks.append(
            {
                "instance": inst,
                "class_name": cls,
                "bundle": bundle,
                "request": request,
                "digest": request_digest(request),
            }
        )

    backend = _build_backend(cfg)

    def complete_one(task: dict):
        try:
            return client_mod.complete(backend, task["request"])
        except FixtureMissError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=cfg.max_in_flight) as pool:
        results = list(pool.map(complete_one, tasks))

    misses = [r.digest for r in results if isinstance(r, FixtureMissError)]
    if misses:
        raise MissingFixtures(misses)

    instances: list[dict] = []
    preds: list[tuple[str, ParsedEvent]] = []
    for task, response in zip(tasks, results):
        inst = task["instance"]
        parsed = _parse(style, response.text, ontology, inst.event_type)
        preds.append((inst.id, parsed))
        instances.append(
            {
                "id": inst.id,
                "event_type": task["class_name"],
                "prompt_digest": task["digest"],
                "prompt_chars": len(task["bundle"].text),
                "example_ids": list(task["bundle"].example_ids),
                "completion": response.text,
                "finish_reason": response.finish_reason,
                "parsed": _parsed_to_dict(parsed),
            }
        )

    report = {
        "config": _config_echo(cfg),
        "instances": instances,
        "skipped": skipped,
        "shortfall": shortfall,
        "score": score(preds, test, hf).to_dict(),
    }
    if cfg.output_path:
        write_report(report, cfg.output_path)
    return report


def write_report(report: dict, path: str) -> None:
    """Serialize with stable key order and atomically replace the target."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    payload = json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".report-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(payload)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def load_report(path: str, ontology: Ontology | None = None) -> dict:
    """Load a report and re-verify completion/parse consistency."""
    with open(path, encoding="utf-8") as fh:
        report = json.load(fh)
    config = report.get("config", {})
    if ontology is None:
        ontology = load_ontology(config["ontology_path"])
    style = PromptStyle(config.get("prompt_style", "code"))
    for entry in report.get("instances", []):
        parsed = _parse(style, entry["completion"], ontology, entry["event_type"])
        if _parsed_to_dict(parsed) != entry["parsed"]:
            raise ReportError(
                f"instance {entry['id']!r}: stored parse does not match its completion"
            )
    return report


def compare(cfg_code: RunConfig, cfg_text: RunConfig, output_path: str | None = None) -> dict:
    """Run two configs over the same corpus and report first-minus-second F1.

    Intended for code-versus-text prompt comparisons, but any style pair
    sharing corpus, k, and selection mode is accepted (including a config
    against itself, which yields exact zero deltas).
    """
    for field_name in ("train_path", "test_path", "k", "selection_mode"):
        a, b = getattr(cfg_code, field_name), getattr(cfg_text, field_name)
        if a != b:
            raise ConfigError(f"configs disagree on {field_name}: {a!r} vs {b!r}")

    report_code = run(cfg_code)
    report_text = run(cfg_text)
    micro_code = report_code["score"]["micro"]
    micro_text = report_text["score"]["micro"]
    report = {
        "code": report_code,
        "text": report_text,
        "delta": {
            "arg_i_f1": micro_code["arg_i"]["f1"] - micro_text["arg_i"]["f1"],
            "arg_c_f1": micro_code["arg_c"]["f1"] - micro_text["arg_c"]["f1"],
        },
    }
    if output_path:
        write_report(report, output_path)
    return report
