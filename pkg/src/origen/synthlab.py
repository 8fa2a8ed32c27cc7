"""Desk-scale scenario harness with exact oracles.

Scenarios reproduce the experiment structure against synthetic backends
whose true expected distances are enumerable: a prompt ladder from abstract
to specific, a planted unique reference standing in for a protected
character, and a distorted conditional whose "abstract" prompt secretly
concentrates on that reference. Qualitative findings are encoded as
margin-bearing assertions (> 3x combined standard error) because there are
no numeric target values to match, only orderings.
"""

from __future__ import annotations

import json
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .backends import build_synthetic_backend
from .backends.synthetic import DiscreteConfig, MixtureComponent, MixtureConfig
from .errors import InputError
from .estimator import (Conditioning, EstimateSummary, Reference,
                        combined_standard_error, repeated_estimates,
                        typicality_summary)
from .genericize import genericize_stream, similarity_report
from .geometry import Embedding, Metric
from .seeds import derive_seed
from .store.manifest import RunManifest, load_manifest

__all__ = [
    "Scenario", "ScenarioAssertion", "AssertionResult", "ValidationReport",
    "scenario_abstraction_ladder", "scenario_failure_mode",
    "scenario_planted_unique", "negative_control_scenario", "all_scenarios",
    "run_paper_protocol", "DEFAULT_DIM",
]

DEFAULT_DIM = 64
MARGIN_FACTOR = 3.0

LADDER_PROMPTS = (
    "a teapot",
    "a round teapot",
    "a round blue teapot",
    "a round blue teapot with a brass lid",
    "a round blue teapot with a brass lid and a floral pattern",
)
REPLICA_PROMPT = "an exact replica of the registered teapot"

FAILURE_PROMPTS = (
    "a whistling kettle",
    "a stout whistling kettle with a curved spout",
    "a whistling kettle with a brass lid and curved spout",
    "a stout whistling kettle with a wooden handle",
    "a stout whistling kettle with a brass lid, curved spout and wooden handle",
)

PLANTED_PROMPT = "a figure on a plain field"


@dataclass(frozen=True)
class ScenarioAssertion:
    """One machine-checkable expected outcome."""

    name: str
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    name: str
    backend_config: Union[DiscreteConfig, MixtureConfig]
    prompts: tuple[str, ...]
    planted_reference: Reference
    assertions: tuple[ScenarioAssertion, ...]
    seed: int
    dim: int = DEFAULT_DIM
    extra_prompts: tuple[str, ...] = ()
    genericize_prompt: str | None = None

    def all_prompts(self) -> tuple[str, ...]:
        return self.prompts + self.extra_prompts


def _basis(dim: int, axis: int) -> np.ndarray:
    v = np.zeros(dim)
    v[axis] = 1.0
    return v


def _ladder_config(dim: int, prompt_w0: dict[str, float],
                   n_far: int = 4) -> tuple[DiscreteConfig, Reference]:
    """Discrete support: the planted point plus n_far orthogonal decoys.

    Per-prompt weight w0 sits on the planted point; the rest spreads
    uniformly over the decoys, so the exact reference originality is 1 - w0.
    """
    planted = Embedding(_basis(dim, 0), id="planted:reference")
    decoys = [Embedding(_basis(dim, i + 1), id=f"decoy:{i}") for i in range(n_far)]
    base = [(0.2, planted)] + [(0.8 / n_far, d) for d in decoys]
    table = {}
    for prompt, w0 in prompt_w0.items():
        table[prompt] = tuple([w0] + [(1.0 - w0) / n_far] * n_far)
    config = DiscreteConfig(support=tuple(base), prompt_table=table)
    return config, Reference(planted, label="planted-reference")


def scenario_abstraction_ladder(dim: int = DEFAULT_DIM, seed: int = 7001) -> Scenario:
    """Conditional mass moves onto the planted reference as prompts sharpen.

    Exact reference originalities across the ladder are 0.98, 0.75, 0.55,
    0.35, 0.15 (strictly decreasing), and the replica prompt is a point mass
    on the reference (originality exactly 0).
    """
    w0_ladder = dict(zip(LADDER_PROMPTS, (0.02, 0.25, 0.45, 0.65, 0.85)))
    w0_ladder[REPLICA_PROMPT] = 1.0  # exact point mass on the planted point
    config, planted = _ladder_config(dim, w0_ladder)
    assertions = (
        ScenarioAssertion("ladder-strictly-decreasing", "ladder-decreasing"),
        ScenarioAssertion("reference-above-typical-under-abstract",
                          "ref-above-typical", {"prompt": LADDER_PROMPTS[0]}),
        ScenarioAssertion("replica-prompt-zero-originality",
                          "pointmass-zero", {"prompt": REPLICA_PROMPT}),
    )
    return Scenario(
        name="abstraction-ladder",
        backend_config=config,
        prompts=LADDER_PROMPTS,
        planted_reference=planted,
        assertions=assertions,
        seed=seed,
        dim=dim,
        extra_prompts=(REPLICA_PROMPT,),
        genericize_prompt=LADDER_PROMPTS[-1],
    )


def scenario_failure_mode(dim: int = DEFAULT_DIM, seed: int = 7002,
                          distorted: bool = True) -> Scenario:
    """The "harmless abstract prompt" that secretly concentrates on the reference.

    Distorted: the abstract prompt carries w0 = 0.5 on the planted point
    (exact originality 0.5) while the specific prompt carries w0 = 0.10
    (exact originality 0.90): the ordering inversion. Undistorted restores
    broad abstract weights (w0 = 0.02) and the normal ordering.
    """
    w0 = {
        FAILURE_PROMPTS[0]: 0.5 if distorted else 0.02,
        FAILURE_PROMPTS[1]: 0.06,
        FAILURE_PROMPTS[2]: 0.08,
        FAILURE_PROMPTS[3]: 0.09,
        FAILURE_PROMPTS[4]: 0.10,
    }
    config, planted = _ladder_config(dim, w0)
    if distorted:
        assertions = (
            ScenarioAssertion("abstract-below-specific", "below-by-margin",
                              {"low": FAILURE_PROMPTS[0], "high": FAILURE_PROMPTS[-1]}),
            ScenarioAssertion("abstract-below-typicality", "inversion-below-typical",
                              {"prompt": FAILURE_PROMPTS[0]}),
        )
        name = "failure-mode-distorted"
    else:
        assertions = (
            ScenarioAssertion("abstract-above-specific-restored", "below-by-margin",
                              {"low": FAILURE_PROMPTS[-1], "high": FAILURE_PROMPTS[0]}),
        )
        name = "failure-mode-undistorted"
    return Scenario(
        name=name,
        backend_config=config,
        prompts=FAILURE_PROMPTS,
        planted_reference=planted,
        assertions=assertions,
        seed=seed,
        dim=dim,
        genericize_prompt=FAILURE_PROMPTS[-1],
    )


def _planted_mixture(dim: int, reference_axis: int) -> tuple[MixtureConfig, Reference]:
    e_ref = _basis(dim, reference_axis)
    e_main = _basis(dim, 1)
    components = (
        MixtureComponent(weight=0.05, mean_direction=_basis(dim, 0), concentration=1600.0),
        MixtureComponent(weight=0.60, mean_direction=e_main, concentration=200.0),
        MixtureComponent(weight=0.20, mean_direction=e_main + 0.5 * _basis(dim, 2),
                         concentration=200.0),
        MixtureComponent(weight=0.15, mean_direction=e_main + 0.5 * _basis(dim, 3),
                         concentration=200.0),
    )
    config = MixtureConfig(components=components)
    planted = Reference(Embedding(e_ref, id="planted:unique"), label="planted-unique")
    return config, planted


def scenario_planted_unique(dim: int = DEFAULT_DIM, seed: int = 7003) -> Scenario:
    """A rare distinctive mode (5%) amid broad generic modes.

    Selection should live in the generic cluster, suppressing the near-
    reference draws that occasionally appear in a batch.
    """
    config, planted = _planted_mixture(dim, reference_axis=0)
    assertions = (
        ScenarioAssertion("selected-p95-below-raw-p95", "suppression-p95"),
        ScenarioAssertion("no-selection-in-raw-top-band", "no-selection-in-top-band",
                          {"percentile": 99.0}),
        ScenarioAssertion("selected-mean-below-top-decile-mean",
                          "selected-below-top-decile"),
    )
    return Scenario(
        name="planted-unique",
        backend_config=config,
        prompts=(PLANTED_PROMPT,),
        planted_reference=planted,
        assertions=assertions,
        seed=seed,
        dim=dim,
        genericize_prompt=PLANTED_PROMPT,
    )


def negative_control_scenario(dim: int = DEFAULT_DIM, seed: int = 7004) -> Scenario:
    """Corrupted planted-unique: the reference sits on the dominant mode.

    Selections then concentrate *near* the reference, so the suppression
    assertions must fail; validate exits nonzero on it by design.
    """
    config, _ = _planted_mixture(dim, reference_axis=0)
    planted = Reference(Embedding(_basis(dim, 1), id="planted:corrupted"),
                        label="planted-at-dominant-mode")
    assertions = (
        ScenarioAssertion("selected-p95-below-raw-p95", "suppression-p95"),
        ScenarioAssertion("no-selection-in-raw-top-band", "no-selection-in-top-band",
                          {"percentile": 99.0}),
    )
    return Scenario(
        name="negative-control-suppression",
        backend_config=config,
        prompts=(PLANTED_PROMPT,),
        planted_reference=planted,
        assertions=assertions,
        seed=seed,
        dim=dim,
        genericize_prompt=PLANTED_PROMPT,
    )


def all_scenarios(dim: int = DEFAULT_DIM) -> list[Scenario]:
    return [
        scenario_abstraction_ladder(dim),
        scenario_failure_mode(dim),
        scenario_planted_unique(dim),
    ]


# -- protocol execution -------------------------------------------------------


@dataclass(frozen=True)
class AssertionResult:
    name: str
    kind: str
    passed: bool
    margin: float
    threshold: float
    detail: str

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "passed": self.passed,
                "margin": self.margin, "threshold": self.threshold,
                "detail": self.detail}


@dataclass(frozen=True)
class ValidationReport:
    scenario: str
    metric: str
    n: int
    m: int
    K: int
    passed: bool
    assertions: tuple[AssertionResult, ...]
    genericize_sample_records: int
    selection_records: int
    elapsed_seconds: float
    manifest_path: str

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario, "metric": self.metric,
            "n": self.n, "m": self.m, "K": self.K, "passed": self.passed,
            "assertions": [a.to_dict() for a in self.assertions],
            "genericize_sample_records": self.genericize_sample_records,
            "selection_records": self.selection_records,
            "elapsed_seconds": self.elapsed_seconds,
            "manifest_path": self.manifest_path,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"scenario {self.scenario}: "
                 f"{'PASS' if self.passed else 'FAIL'} "
                 f"({self.elapsed_seconds:.1f}s, "
                 f"{self.genericize_sample_records} genericize samples, "
                 f"{self.selection_records} selections)"]
        for a in self.assertions:
            status = "pass" if a.passed else "FAIL"
            lines.append(f"  [{status}] {a.name}: margin={a.margin:+.5f} "
                         f"threshold={a.threshold:.5f} ({a.detail})")
        return "\n".join(lines)


def _margin_result(assertion: ScenarioAssertion, low: EstimateSummary,
                   high: EstimateSummary, detail: str) -> AssertionResult:
    threshold = MARGIN_FACTOR * combined_standard_error(low, high)
    margin = high.mean - low.mean
    return AssertionResult(
        name=assertion.name, kind=assertion.kind,
        passed=margin > threshold, margin=float(margin),
        threshold=float(threshold), detail=detail)


def run_paper_protocol(scenario: Scenario, metric: Union[str, Metric] = "cosine-distance",
                       *, n: int = 40, m: int = 40, K: int = 250,
                       out_dir: str | Path | None = None,
                       parallelism: int = 1,
                       bins: int = 50) -> ValidationReport:
    """Full replay: per-prompt repeated estimation + one genericize stream.

    Per prompt: m reference estimates of n samples plus m typicality probes
    estimated the same way. Genericization: K batches of n under the
    scenario's designated prompt, K*n sample records total. Every scenario
    assertion is evaluated and reported with its measured margin; a failed
    assertion fails the report, never the process.
    """
    from .geometry import resolve_metric
    met = resolve_metric(metric)
    start = time.perf_counter()
    if out_dir is None:
        tmp = tempfile.TemporaryDirectory(prefix="origen-protocol-")
        out_path = Path(tmp.name)
    else:
        tmp = None
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
    backend = build_synthetic_backend(scenario.backend_config)
    config_snapshot = {
        "scenario": scenario.name, "backend": backend.id, "metric": met.name,
        "n": n, "m": m, "K": K, "seed": scenario.seed, "dim": scenario.dim,
        "prompts": list(scenario.all_prompts()),
        "genericize_prompt": scenario.genericize_prompt,
        "reference": {"id": scenario.planted_reference.embedding.id,
                      "label": scenario.planted_reference.label,
                      "values": scenario.planted_reference.embedding.values},
    }
    manifest_path = out_path / f"{scenario.name}.manifest"
    run_id = f"protocol:{scenario.name}:{scenario.seed}"
    ref_summaries: dict[str, EstimateSummary] = {}
    typ_summaries: dict[str, EstimateSummary] = {}
    with RunManifest(manifest_path, run_id, config_snapshot) as manifest:
        for prompt in scenario.all_prompts():
            cond = Conditioning(prompt=prompt, backend_id=backend.id,
                                seed_base=derive_seed(scenario.seed, "prompt", prompt))
            ref_summaries[prompt] = repeated_estimates(
                scenario.planted_reference, cond, n, m, met, backend,
                manifest=manifest, parallelism=parallelism)
            typ_summaries[prompt] = typicality_summary(
                cond, n, m, met, backend, manifest=manifest, parallelism=parallelism)
        selections = []
        if scenario.genericize_prompt is not None:
            cond = Conditioning(prompt=scenario.genericize_prompt,
                                backend_id=backend.id,
                                seed_base=derive_seed(scenario.seed, "prompt",
                                                      scenario.genericize_prompt))
            selections = genericize_stream(cond, K, n, met, backend,
                                           manifest=manifest, parallelism=parallelism)
    loaded = load_manifest(manifest_path)
    gen_slice = loaded.slice(prompt=scenario.genericize_prompt, phase="genericize")
    results = [
        _evaluate(a, scenario, ref_summaries, typ_summaries, gen_slice, met)
        for a in scenario.assertions
    ]
    elapsed = time.perf_counter() - start
    report = ValidationReport(
        scenario=scenario.name, metric=met.name, n=n, m=m, K=K,
        passed=all(r.passed for r in results),
        assertions=tuple(results),
        genericize_sample_records=len(gen_slice.samples),
        selection_records=len(gen_slice.selections),
        elapsed_seconds=elapsed,
        manifest_path=str(manifest_path),
    )
    if tmp is not None:
        tmp.cleanup()
    return report


def _evaluate(assertion: ScenarioAssertion, scenario: Scenario,
              ref_summaries: dict[str, EstimateSummary],
              typ_summaries: dict[str, EstimateSummary],
              gen_slice, met) -> AssertionResult:
    kind = assertion.kind
    params = assertion.params
    if kind == "ladder-decreasing":
        worst_margin, worst_threshold, ok = np.inf, 0.0, True
        steps = []
        for a, b in zip(scenario.prompts, scenario.prompts[1:]):
            higher, lower = ref_summaries[a], ref_summaries[b]
            threshold = MARGIN_FACTOR * combined_standard_error(higher, lower)
            margin = higher.mean - lower.mean
            ok = ok and margin > threshold
            steps.append(f"{margin:+.4f}>{threshold:.4f}")
            if margin - threshold < worst_margin - worst_threshold:
                worst_margin, worst_threshold = margin, threshold
        return AssertionResult(assertion.name, kind, ok, float(worst_margin),
                               float(worst_threshold), "steps " + ", ".join(steps))
    if kind == "ref-above-typical":
        prompt = params.get("prompt", scenario.prompts[0])
        return _margin_result(assertion, typ_summaries[prompt], ref_summaries[prompt],
                              f"reference vs typicality under {prompt!r}")
    if kind == "pointmass-zero":
        prompt = params["prompt"]
        mean = ref_summaries[prompt].mean
        return AssertionResult(assertion.name, kind, abs(mean) <= 1e-12,
                               float(mean), 1e-12,
                               f"reference originality under point-mass prompt {prompt!r}")
    if kind == "below-by-margin":
        low = ref_summaries[params["low"]]
        high = ref_summaries[params["high"]]
        return _margin_result(assertion, low, high,
                              f"{params['low']!r} below {params['high']!r}")
    if kind == "inversion-below-typical":
        prompt = params["prompt"]
        return _margin_result(assertion, ref_summaries[prompt], typ_summaries[prompt],
                              f"reference below typicality under {prompt!r}")
    if kind in ("suppression-p95", "no-selection-in-top-band",
                "selected-below-top-decile"):
        rep = similarity_report(scenario.planted_reference, gen_slice, met)
        raw, sel = rep.raw_similarities, rep.selected_similarities
        if kind == "suppression-p95":
            margin = float(np.percentile(raw, 95) - np.percentile(sel, 95))
            return AssertionResult(assertion.name, kind, margin > 0.0, margin, 0.0,
                                   "p95(raw) - p95(selected), must be strictly positive")
        if kind == "no-selection-in-top-band":
            pct = params.get("percentile", 99.0)
            band = float(np.percentile(raw, pct))
            offenders = int(np.sum(sel > band))
            return AssertionResult(assertion.name, kind, offenders == 0,
                                   float(band - sel.max()), 0.0,
                                   f"{offenders} selections above the raw "
                                   f"{pct:g}th percentile {band:.4f}")
        top_decile = np.sort(raw)[-max(1, len(raw) // 10):]
        margin = float(top_decile.mean() - sel.mean())
        return AssertionResult(assertion.name, kind, margin > 0.0, margin, 0.0,
                               "mean(top-decile raw) - mean(selected)")
    raise InputError(f"unknown assertion kind {kind!r}")
