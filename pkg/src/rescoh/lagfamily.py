"""Lag-product candidate families, criterion scans and greedy input selection."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .decomposition import SpectralSystem, decompose, integrated_spectrum, residual_coherence
from .errors import (
    DegenerateComponentError,
    DegenerateSpectrumError,
    InconsistentSystemError,
    InvalidInputError,
    SingularSystemError,
)
from .spectral import FrequencyGrid, LagWindow
from .timeseries import Series, as_series

CROSS = "cross"
SELF = "self"
RC = "RC"
IS = "IS"
CRITERIA = (RC, IS)
SCHEMA_VERSION = 1

_DEGENERATE = (SingularSystemError, DegenerateComponentError, InconsistentSystemError, DegenerateSpectrumError)


@dataclass(frozen=True, eq=False)
class CandidateFamily:
    """Family of lag-product processes indexed by ``h`` in ``[h_min, h_max]``.

    ``kind="cross"`` gives ``X_a(t+h) X_b(t)``; ``kind="self"`` gives the lag
    process ``X_a(t) X_a(t-h)``.  Every member is centred by its sample mean.
    """

    base_a: Series
    base_b: Optional[Series] = None
    h_min: int = -9
    h_max: int = 9
    kind: str = CROSS

    def __post_init__(self):
        object.__setattr__(self, "base_a", as_series(self.base_a))
        if self.kind == SELF:
            object.__setattr__(self, "base_b", self.base_a)
        elif self.kind == CROSS:
            if self.base_b is None:
                raise InvalidInputError("a cross-product family needs two base series")
            object.__setattr__(self, "base_b", as_series(self.base_b))
        else:
            raise InvalidInputError(f"unknown family kind {self.kind!r}")
        if len(self.base_a) != len(self.base_b):
            raise InvalidInputError("base series lengths differ")
        if self.h_min > self.h_max:
            raise InvalidInputError(f"empty lag range [{self.h_min}, {self.h_max}]")
        start, stop = self.window()
        if stop - start < 10 * len(self.lags):
            raise InvalidInputError(
                f"common window of {stop - start} samples is too short for {len(self.lags)} lags"
            )

    @property
    def lags(self) -> range:
        return range(self.h_min, self.h_max + 1)

    @property
    def n(self) -> int:
        return len(self.base_a)

    def offsets(self, h: int) -> Tuple[int, int]:
        """Time offsets of the two factors for member ``h``."""
        return (h, 0) if self.kind == CROSS else (0, -h)

    def window(self, common_length: Optional[int] = None) -> Tuple[int, int]:
        """Index range ``[start, stop)`` on which every member is defined."""
        offs = [o for h in self.lags for o in self.offsets(h)]
        start = max(0, -min(offs))
        stop = self.n - max(0, max(offs))
        if common_length is not None:
            if stop - start < common_length:
                raise InvalidInputError(
                    f"common window has {max(stop - start, 0)} samples, fewer than {common_length}"
                )
            start = stop - common_length
        return start, stop

    def label(self, h: int) -> str:
        a = self.base_a.name or "x1"
        b = self.base_b.name or ("x2" if self.kind == CROSS else a)
        oa, ob = self.offsets(h)
        return f"{_term(a, oa)}{_term(b, ob)}"


def _term(name: str, offset: int) -> str:
    if offset == 0:
        return f"{name}(t)"
    return f"{name}(t{offset:+d})"


def build_candidate(fam: CandidateFamily, h: int, common_length: Optional[int] = None) -> Series:
    """Centred product series of member ``h`` on the family's common window."""
    if h not in fam.lags:
        raise InvalidInputError(f"lag {h} outside [{fam.h_min}, {fam.h_max}]")
    start, stop = fam.window(common_length)
    oa, ob = fam.offsets(h)
    z = fam.base_a.values[start + oa : stop + oa] * fam.base_b.values[start + ob : stop + ob]
    z = z - z.mean()
    return Series(z, name=fam.label(h))


def _truncate(s, fam: CandidateFamily, start: int, stop: int) -> np.ndarray:
    v = as_series(s).values
    if v.size != fam.n:
        raise InvalidInputError(f"series of length {v.size} is not aligned with the family bases ({fam.n})")
    return v[start:stop]


def assemble_system(y, fixed_inputs: Sequence, fam: CandidateFamily, h: int, fixed_lags: Sequence[int] = (), window: LagWindow = LagWindow(), grid: FrequencyGrid = FrequencyGrid()) -> SpectralSystem:
    """Spectral system with inputs ``fixed_inputs ++ [candidates of fixed_lags] ++ [candidate h]``."""
    start, stop = fam.window()
    inputs = [_truncate(s, fam, start, stop) for s in fixed_inputs]
    inputs += [build_candidate(fam, u).values for u in fixed_lags]
    inputs.append(build_candidate(fam, h).values)
    lags = (None,) * len(fixed_inputs) + tuple(fixed_lags) + (h,)
    return SpectralSystem.from_series(inputs, _truncate(y, fam, start, stop), window, grid, lags)


@dataclass(frozen=True, eq=False)
class ScanResult:
    """Criterion value for every lag of a family, as drawn in the bar plots.

    Lags fixed at earlier stages and lags whose system was degenerate carry
    value 0 and are never the argmax.
    """

    criterion: str
    values: Dict[int, float]
    excluded: FrozenSet[int] = frozenset()
    degenerate: FrozenSet[int] = frozenset()
    notes: Dict[int, str] = field(default_factory=dict)

    @property
    def candidates(self) -> List[int]:
        return [h for h in self.values if h not in self.excluded and h not in self.degenerate]

    @property
    def ranking(self) -> List[int]:
        """Eligible lags by decreasing value; ties keep lag order."""
        order = list(self.values)
        return sorted(self.candidates, key=lambda h: (-self.values[h], order.index(h)))

    @property
    def argmax(self) -> Optional[int]:
        r = self.ranking
        return r[0] if r else None

    @property
    def prominence(self) -> float:
        """Ratio of the largest eligible value to the median eligible value."""
        vals = np.array([self.values[h] for h in self.candidates])
        if vals.size == 0:
            return 0.0
        med = float(np.median(vals))
        top = float(vals.max())
        if med <= 0:
            return np.inf if top > 0 else 0.0
        return top / med

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "value", "excluded", "degenerate"])
        for h, v in self.values.items():
            w.writerow([h, repr(float(v)), int(h in self.excluded), int(h in self.degenerate)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "values": [
                {"h": h, "value": float(v), "excluded": h in self.excluded, "degenerate": h in self.degenerate}
                for h, v in self.values.items()
            ],
            "argmax": self.argmax,
            "ranking": self.ranking,
            "prominence": None if not np.isfinite(self.prominence) else self.prominence,
            "notes": {str(h): n for h, n in self.notes.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScanResult":
        rows = d["values"]
        return cls(
            d["criterion"],
            {int(r["h"]): float(r["value"]) for r in rows},
            frozenset(int(r["h"]) for r in rows if r["excluded"]),
            frozenset(int(r["h"]) for r in rows if r["degenerate"]),
            {int(h): n for h, n in d.get("notes", {}).items()},
        )


def _check_criteria(criteria) -> Tuple[str, ...]:
    if isinstance(criteria, str):
        criteria = CRITERIA if criteria.lower() == "both" else (criteria,)
    out = tuple(c.upper() for c in criteria)
    for c in out:
        if c not in CRITERIA:
            raise InvalidInputError(f"unknown criterion {c!r}; expected RC, IS or both")
    return out


def scan_criteria(
    y,
    fixed_inputs: Sequence,
    fam: CandidateFamily,
    criteria=CRITERIA,
    window: LagWindow = LagWindow(),
    grid: FrequencyGrid = FrequencyGrid(),
    fixed_lags: Sequence[int] = (),
    n_jobs: Optional[int] = None,
    on_degenerate: str = "clamp",
) -> Dict[str, ScanResult]:
    """Evaluate several criteria over a family, sharing one decomposition per lag.

    Returns a mapping from criterion name to :class:`ScanResult`.
    """
    criteria = _check_criteria(criteria)
    if not fixed_inputs:
        raise InvalidInputError("scan needs at least one fixed input")
    fixed_lags = tuple(int(u) for u in fixed_lags)
    m = len(fixed_inputs) + len(fixed_lags)
    todo = [h for h in fam.lags if h not in fixed_lags]

    def evaluate(h):
        try:
            sys = assemble_system(y, fixed_inputs, fam, h, fixed_lags, window, grid)
            res = decompose(sys, on_degenerate)
            out = {}
            if RC in criteria:
                out[RC] = residual_coherence(sys, m, res)
            if IS in criteria:
                out[IS] = integrated_spectrum(sys, m, res)
            return out, None
        except _DEGENERATE as exc:
            return None, f"{type(exc).__name__}: {exc}"

    if n_jobs is not None and n_jobs != 1 and len(todo) > 1:
        workers = None if n_jobs < 0 else n_jobs
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(evaluate, todo))
    else:
        outcomes = [evaluate(h) for h in todo]
    by_lag = dict(zip(todo, outcomes))

    results = {}
    for c in criteria:
        values, degenerate, notes = {}, set(), {}
        for h in fam.lags:
            if h in fixed_lags:
                values[h] = 0.0
                continue
            out, err = by_lag[h]
            if out is None:
                values[h] = 0.0
                degenerate.add(h)
                notes[h] = err
            else:
                values[h] = out[c]
        results[c] = ScanResult(c, values, frozenset(fixed_lags), frozenset(degenerate), notes)
    return results


def scan(y, fixed_inputs: Sequence, fam: CandidateFamily, criterion: str = RC, window: LagWindow = LagWindow(), grid: FrequencyGrid = FrequencyGrid(), fixed_lags: Sequence[int] = (), n_jobs: Optional[int] = None, on_degenerate: str = "clamp") -> ScanResult:
    """Scan one criterion (``"RC"`` or ``"IS"``) over every lag of ``fam``.

    The inputs of each system are ``fixed_inputs``, then the candidates of
    ``fixed_lags`` (earlier selections, reported excluded with value 0), then
    the candidate under test; the baseline is everything but the last input.
    """
    (criterion,) = _check_criteria((criterion,))
    return scan_criteria(y, fixed_inputs, fam, (criterion,), window, grid, fixed_lags, n_jobs, on_degenerate)[criterion]


@dataclass(frozen=True)
class StopRule:
    """Stop when the tallest bar is not ``ratio`` times the median bar.

    ``ratio=None`` accepts every argmax until ``max_stages`` is reached.
    """

    ratio: Optional[float] = 3.5
    max_stages: int = 4

    def __post_init__(self):
        if self.max_stages < 1:
            raise InvalidInputError("max_stages must be at least 1")


@dataclass(frozen=True)
class SelectionResult:
    selected: List[int]
    stages: List[Dict[str, ScanResult]]
    stop_reason: str
    criterion: str

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "criterion": self.criterion,
            "selected": list(self.selected),
            "stop_reason": self.stop_reason,
            "stages": [
                {"stage": i + 1, "scans": {c: r.to_dict() for c, r in st.items()}}
                for i, st in enumerate(self.stages)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _pick(stage: Dict[str, ScanResult], rule: StopRule) -> Optional[int]:
    """Lag to accept from a stage, or None when no bar stands out.

    IS decides when it was scanned: the sup in RC makes its bar heights too
    noisy to stop on.
    """
    r = stage.get(IS) or stage.get(RC)
    if r is None or r.argmax is None:
        return None
    if rule.ratio is not None and not r.prominence >= rule.ratio:
        return None
    return r.argmax


def greedy_select(
    y,
    initial_inputs: Sequence,
    fam: CandidateFamily,
    criterion: str = "both",
    stop_rule: StopRule = StopRule(),
    window: LagWindow = LagWindow(),
    grid: FrequencyGrid = FrequencyGrid(),
    n_jobs: Optional[int] = None,
) -> SelectionResult:
    """Scan, accept the argmax, fix it and rescan until the stop rule fires.

    With ``criterion="both"`` both scans are recorded and IS drives the
    decision.
    """
    criteria = _check_criteria(criterion)
    selected: List[int] = []
    stages: List[Dict[str, ScanResult]] = []
    reason = f"reached max stages ({stop_rule.max_stages})"
    for _ in range(stop_rule.max_stages):
        if all(h in selected for h in fam.lags):
            reason = "no candidates left"
            break
        stage = scan_criteria(y, initial_inputs, fam, criteria, window, grid, selected, n_jobs)
        stages.append(stage)
        pick = _pick(stage, stop_rule)
        if pick is None:
            if all(r.argmax is None for r in stage.values()):
                reason = "no candidates left"
            else:
                reason = "no prominent bar"
            break
        selected.append(pick)
    label = "both" if len(criteria) > 1 else criteria[0]
    return SelectionResult(selected, stages, reason, label)
