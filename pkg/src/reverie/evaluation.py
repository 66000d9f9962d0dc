"""Scenario evaluation: ablation matrix, judging, and summary statistics.

Each scenario runs through a fresh session wired per ablation variant; the
critical-turn response is judged pass/fail against the scenario rubric, and
summaries carry percentile-bootstrap confidence intervals over scenario-level
outcomes.
"""

from __future__ import annotations

import csv
import io
import json
import re
import statistics
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .gateway import Backend, GenerationRequest
from .monologue import load_prompt
from .scenarios import ScenarioScript
from .session import AgentConfig, AgentSession, VARIANTS
from .state import Message

DEFAULT_RESAMPLES = 10_000

# Which components each ablation variant is allowed to call, per turn.
VARIANT_WIRING = {
    "base": ("talker",),
    "threads_only": ("talker", "manager"),
    "controller_only": ("talker", "controller"),
    "full": ("talker", "manager", "controller"),
}


class JudgeError(Exception):
    pass


@dataclass
class JudgeVerdict:
    passed: bool
    rationale: str
    reasks: int = 0


@dataclass
class ScenarioRecord:
    scenario_id: str
    scenario_class: int
    variant: str
    passed: Optional[bool] = None
    rationale: str = ""
    final_response: str = ""
    errored: bool = False
    error: str = ""
    call_counts: dict[str, int] = field(default_factory=dict)
    turn_count: int = 0


@dataclass
class EvalResult:
    overall_rate: float
    per_class_rates: dict[int, float]
    ci_low: float
    ci_high: float
    n_scored: int
    n_errored: int
    per_variant_rates: dict[str, float] = field(default_factory=dict)
    relative_improvements: dict[str, float] = field(default_factory=dict)


VERDICT_RE = re.compile(r"\b(PASS|FAIL)\b")


def parse_verdict(text: str) -> Optional[bool]:
    match = VERDICT_RE.search(text)
    if match is None:
        return None
    return match.group(1) == "PASS"


def judge(
    final_response: str,
    rubric: str,
    judge_backend: Backend,
    model_id: str = "judge-model",
    turn_index: int = 0,
) -> JudgeVerdict:
    """One judging call with a single bounded re-ask on an unparseable verdict."""
    if not rubric:
        raise ValueError("judge rubric must be non-empty")
    template = load_prompt("judge")
    # Literal substitution: judged responses may themselves contain braces.
    prompt = template.replace("{rubric}", rubric).replace("{response}", final_response)

    def ask(extra: str = "") -> str:
        request = GenerationRequest(
            model_id=model_id,
            system_prompt="",
            messages=(Message(role="user", content=prompt + extra, turn_index=turn_index),),
            component="judge",
            turn_index=turn_index,
        )
        return judge_backend.generate(request).content

    content = ask()
    verdict = parse_verdict(content)
    if verdict is None:
        content = ask("\n\nAnswer with the single token PASS or FAIL first.")
        verdict = parse_verdict(content)
        if verdict is None:
            raise JudgeError(f"no PASS/FAIL verdict in: {content[:200]!r}")
        return JudgeVerdict(passed=verdict, rationale=content, reasks=1)
    return JudgeVerdict(passed=verdict, rationale=content)


def run_scenario(
    script: ScenarioScript,
    variant: str,
    agent_backend: Backend,
    judge_backend: Backend,
    config: Optional[AgentConfig] = None,
    judge_model_id: str = "judge-model",
) -> ScenarioRecord:
    """Play one scenario through a fresh session wired for the variant.

    Reflection is drained after each turn so scripted runs are deterministic
    and every turn's narrative (when the variant produces one) is available
    to the next.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant: {variant!r}")
    if config is None:
        config = AgentConfig(variant=variant, retries=0)
    elif config.variant != variant:
        raise ValueError("config.variant must match the requested variant")
    record = ScenarioRecord(
        scenario_id=script.scenario_id,
        scenario_class=script.scenario_class,
        variant=variant,
        turn_count=len(script.turns),
    )
    session = AgentSession(agent_backend, config)
    final_response = ""
    try:
        for i, turn in enumerate(script.turns):
            trace = session.post_message(turn.user_text)
            session.drain(timeout=30)
            if i == script.critical_index:
                final_response = trace["reply"]
        failed_jobs = [j for j in session.scheduler.jobs if j.status == "failed"]
        if failed_jobs:
            raise RuntimeError(f"{len(failed_jobs)} reflection job(s) failed")
        record.final_response = final_response
        verdict = judge(
            final_response, script.judge_rubric, judge_backend, model_id=judge_model_id
        )
        record.passed = verdict.passed
        record.rationale = verdict.rationale
    except Exception as exc:  # noqa: BLE001 - batch runs must survive any scenario
        record.errored = True
        record.error = f"{type(exc).__name__}: {exc}"
    if hasattr(agent_backend, "call_counts"):
        record.call_counts = agent_backend.call_counts()
    return record


def bootstrap_ci(
    outcomes: list[int], resamples: int = DEFAULT_RESAMPLES, seed: int = 0
) -> tuple[float, float]:
    """Percentile bootstrap 95% CI over binary scenario outcomes."""
    arr = np.asarray(outcomes, dtype=float)
    if resamples <= 1:
        point = float(arr.mean())
        return point, point
    rng = np.random.default_rng(seed)
    samples = rng.choice(arr, size=(resamples, len(arr)), replace=True).mean(axis=1)
    return float(np.percentile(samples, 2.5)), float(np.percentile(samples, 97.5))


def summarize(
    records: list[ScenarioRecord],
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    compare: Optional[tuple[str, str]] = None,
) -> EvalResult:
    """Success rates, bootstrap CI, and optional variant-vs-variant gains.

    Errored records are excluded from rates and counted separately. compare
    names (candidate, baseline) variants for a relative-improvement table.
    """
    scored = [r for r in records if not r.errored and r.passed is not None]
    errored = [r for r in records if r.errored]
    if not scored:
        raise ValueError("summarize requires at least one non-errored record")
    outcomes = [int(r.passed) for r in scored]
    overall = statistics.fmean(outcomes)

    per_class: dict[int, float] = {}
    for cls in sorted({r.scenario_class for r in scored}):
        cls_outcomes = [int(r.passed) for r in scored if r.scenario_class == cls]
        per_class[cls] = statistics.fmean(cls_outcomes)

    per_variant: dict[str, float] = {}
    for variant in sorted({r.variant for r in scored}):
        v_outcomes = [int(r.passed) for r in scored if r.variant == variant]
        per_variant[variant] = statistics.fmean(v_outcomes)

    ci_low, ci_high = bootstrap_ci(outcomes, resamples=resamples, seed=seed)

    improvements: dict[str, float] = {}
    if compare is not None:
        candidate, baseline = compare
        if candidate in per_variant and baseline in per_variant:
            for cls in per_class:
                cand = [
                    int(r.passed) for r in scored
                    if r.variant == candidate and r.scenario_class == cls
                ]
                base = [
                    int(r.passed) for r in scored
                    if r.variant == baseline and r.scenario_class == cls
                ]
                if cand and base and statistics.fmean(base) > 0:
                    improvements[f"class_{cls}"] = (
                        statistics.fmean(cand) / statistics.fmean(base) - 1.0
                    ) * 100.0
            if per_variant[baseline] > 0:
                improvements["overall"] = (
                    per_variant[candidate] / per_variant[baseline] - 1.0
                ) * 100.0

    return EvalResult(
        overall_rate=overall,
        per_class_rates=per_class,
        ci_low=ci_low,
        ci_high=ci_high,
        n_scored=len(scored),
        n_errored=len(errored),
        per_variant_rates=per_variant,
        relative_improvements=improvements,
    )


def result_to_dict(result: EvalResult) -> dict[str, Any]:
    return {
        "overall_rate": result.overall_rate,
        "per_class_rates": {str(k): v for k, v in result.per_class_rates.items()},
        "ci95": [result.ci_low, result.ci_high],
        "n_scored": result.n_scored,
        "n_errored": result.n_errored,
        "per_variant_rates": result.per_variant_rates,
        "relative_improvements": result.relative_improvements,
    }


def records_to_csv(records: list[ScenarioRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        ["scenario_id", "scenario_class", "variant", "passed", "errored", "error",
         "turn_count", "call_counts"]
    )
    for r in records:
        writer.writerow(
            [r.scenario_id, r.scenario_class, r.variant,
             "" if r.passed is None else int(r.passed), int(r.errored), r.error,
             r.turn_count, json.dumps(r.call_counts)]
        )
    return buf.getvalue()


def render_markdown(result: EvalResult) -> str:
    lines = [
        "| Variant | Success rate |",
        "| --- | --- |",
    ]
    for variant, rate in result.per_variant_rates.items():
        lines.append(f"| {variant} | {rate:.1%} |")
    lines += [
        "",
        f"Overall: {result.overall_rate:.1%} "
        f"(95% CI [{result.ci_low:.3f}, {result.ci_high:.3f}], "
        f"n={result.n_scored}, errored={result.n_errored})",
    ]
    if result.per_class_rates:
        lines += ["", "| Scenario class | Success rate |", "| --- | --- |"]
        for cls, rate in result.per_class_rates.items():
            lines.append(f"| {cls} | {rate:.1%} |")
    if result.relative_improvements:
        lines += ["", "| Slice | Relative improvement |", "| --- | --- |"]
        for key, gain in result.relative_improvements.items():
            lines.append(f"| {key} | {gain:+.1f}% |")
    return "\n".join(lines)
