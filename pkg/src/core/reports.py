import json
import logging
import os
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, validator

from config.settings import REPORT_DIR

logger = logging.getLogger(__name__)

TrialVerdict = Literal["pass", "fail"]
Verdict = Literal["pass", "counterexample", "not-applicable"]


class TrialOutcome(BaseModel):
    """One seeded trial of an experiment"""
    index: int = Field(..., ge=0)
    verdict: TrialVerdict
    witness: Optional[Dict[str, Any]] = None


class LevelResult(BaseModel):
    n: int = Field(..., ge=0)
    trials: List[TrialOutcome] = Field(default_factory=list)
    verdict: Verdict = "pass"
    details: Dict[str, Any] = Field(default_factory=dict)


class ExperimentReport(BaseModel):
    """Result of a finite-level theorem check; reproducible from (seed, params)"""
    theorem: str = Field(..., min_length=1)
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: int = Field(..., ge=0)
    levels: List[LevelResult] = Field(default_factory=list)
    verdict: Verdict = "pass"
    elapsed_ms: Optional[int] = None

    @validator('verdict', always=True)
    def counterexample_is_sticky(cls, v, values):
        """A failing level can never be summarized as a pass"""
        levels = values.get('levels') or []
        if any(level.verdict == "counterexample" for level in levels):
            return "counterexample"
        return v

    def to_json(self) -> str:
        return self.model_dump_json(indent=2, exclude_none=True)


def level_verdict(trials: List[TrialOutcome], checks_pass: bool = True) -> Verdict:
    if not checks_pass or any(t.verdict == "fail" for t in trials):
        return "counterexample"
    return "pass"


def summarize(levels: List[LevelResult]) -> Verdict:
    if any(level.verdict == "counterexample" for level in levels):
        return "counterexample"
    if levels and all(level.verdict == "not-applicable" for level in levels):
        return "not-applicable"
    return "pass"


class MatchingNode(BaseModel):
    """Root matching mu used below the vertex ``path`` of leader letters"""
    path: List[int]
    mu: List[int]


class CertificateModel(BaseModel):
    level: int = Field(..., ge=0)
    degree: int = Field(..., ge=1)
    conjugator: List[int]
    nodes: List[MatchingNode] = Field(default_factory=list)


class SquareConditionEntry(BaseModel):
    symbol: str
    cycle: List[int]
    power_of: Optional[str] = None
    exponent: int = 0


class SquareConditionReport(BaseModel):
    holds: bool
    entries: List[SquareConditionEntry] = Field(default_factory=list)
    violation: Optional[str] = None


class PortraitVertex(BaseModel):
    name: str
    deg: Literal[1, 2]
    image: str


class PortraitModel(BaseModel):
    """JSON export of a portrait; the point at infinity is implicit"""
    vertices: List[PortraitVertex]


def report_to_text(report: ExperimentReport) -> str:
    """Human-readable summary, one line per level"""
    params = ", ".join(f"{k}={v}" for k, v in report.params.items())
    lines = [f"{report.theorem} ({params}) seed={report.seed}: {report.verdict}"]
    for level in report.levels:
        counts: Dict[str, int] = {}
        for trial in level.trials:
            counts[trial.verdict] = counts.get(trial.verdict, 0) + 1
        tally = " ".join(f"{k}={counts[k]}" for k in sorted(counts))
        line = f"  n={level.n}: {level.verdict}"
        if tally:
            line += f" [{tally}]"
        for key, value in level.details.items():
            line += f" {key}={value}"
        lines.append(line)
    if report.elapsed_ms is not None:
        lines.append(f"  elapsed {report.elapsed_ms} ms")
    return "\n".join(lines)


class ReportStore:
    """Saves and loads experiment reports as JSON files"""

    def __init__(self, directory: str = REPORT_DIR):
        self.directory = directory
        os.makedirs(self.directory, exist_ok=True)

    def _path(self, name: str) -> str:
        return os.path.join(self.directory, f"{name}.json")

    def save(self, report: ExperimentReport, name: Optional[str] = None) -> str:
        name = name or f"{report.theorem}_seed{report.seed}"
        path = self._path(name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(report.to_json())
            f.write("\n")
        logger.debug("saved report %s", path)
        return path

    def load(self, name: str) -> Optional[ExperimentReport]:
        path = self._path(name)
        if not os.path.exists(path):
            return None
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return ExperimentReport(**json.load(f))
        except (OSError, ValueError) as e:
            logger.error("could not load report %s: %s", path, e)
            return None

    def names(self) -> List[str]:
        return sorted(f[:-5] for f in os.listdir(self.directory) if f.endswith(".json"))
