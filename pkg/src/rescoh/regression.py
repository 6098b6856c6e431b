"""Lagged regression designs, OLS with t-tests and stepwise AIC selection."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .errors import CollinearDesignError, InvalidInputError
from .timeseries import as_series

INTERCEPT = "Intercept"

_FACTOR = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\(\s*t\s*(?:([+-])\s*(\d+))?\s*\))?\s*\*?")


@dataclass(frozen=True)
class Term:
    """Product of base series at fixed time offsets, e.g. ``x1(t-2)x2(t-1)``."""

    factors: Tuple[Tuple[str, int], ...]

    @classmethod
    def parse(cls, text: str) -> "Term":
        """Parse ``"x1"``, ``"x1(t-3)"``, ``"x1(t+4)x2(t)"`` or ``"x1(t+4)*x2(t)"``."""
        pos, factors = 0, []
        text = text.strip()
        while pos < len(text):
            m = _FACTOR.match(text, pos)
            if not m or m.end() == pos:
                raise InvalidInputError(f"cannot parse term {text!r} at position {pos}")
            name, sign, num = m.groups()
            off = 0 if num is None else int(num) * (1 if sign == "+" else -1)
            factors.append((name, off))
            pos = m.end()
        if not factors:
            raise InvalidInputError("empty term")
        return cls(tuple(factors))

    def shifted(self, lag: int) -> "Term":
        return Term(tuple((n, o - lag) for n, o in self.factors))

    @property
    def lead(self) -> int:
        """Smallest lag making every factor non-anticipating."""
        return max(0, max(o for _, o in self.factors))

    @property
    def name(self) -> str:
        return "".join(n + ("(t)" if o == 0 else f"(t{o:+d})") for n, o in self.factors)


def product_term(a: str, b: str, h: int) -> Term:
    """Term for the cross product ``a(t+h) b(t)``."""
    return Term(((a, h), (b, 0)))


@dataclass(frozen=True, eq=False)
class LagDesign:
    """Response and named covariate columns over a common row window."""

    response: np.ndarray
    columns: Dict[str, np.ndarray]
    include_intercept: bool = True

    def __post_init__(self):
        n = np.asarray(self.response).size
        for name, col in self.columns.items():
            if np.asarray(col).size != n:
                raise InvalidInputError(f"column {name!r} has {np.asarray(col).size} rows, expected {n}")
        if self.include_intercept and INTERCEPT in self.columns:
            raise InvalidInputError(f"column name {INTERCEPT!r} is reserved")

    @property
    def names(self) -> List[str]:
        return list(self.columns)

    @property
    def n(self) -> int:
        return np.asarray(self.response).size

    def matrix(self, names: Optional[Sequence[str]] = None, intercept: Optional[bool] = None) -> Tuple[np.ndarray, List[str]]:
        names = self.names if names is None else list(names)
        intercept = self.include_intercept if intercept is None else intercept
        cols = [self.columns[c] for c in names]
        labels = list(names)
        if intercept:
            cols.insert(0, np.ones(self.n))
            labels.insert(0, INTERCEPT)
        x = np.column_stack(cols) if cols else np.empty((self.n, 0))
        return x, labels

    def subset(self, names: Sequence[str]) -> "LagDesign":
        return LagDesign(self.response, {c: self.columns[c] for c in names}, self.include_intercept)


def build_lag_design(
    y,
    inputs: Mapping[str, object],
    lags_per_input: int = 4,
    intercept: bool = True,
    products: Sequence[Union[str, Term]] = (),
) -> LagDesign:
    """Regress-ready design with ``lags_per_input`` lags of every input.

    Each plain input contributes ``x(t), ..., x(t-L+1)``.  Each product term
    is first shifted so no factor looks ahead (``x1(t+4)x2(t)`` starts at
    ``x1(t)x2(t-4)``) and then lagged the same way.  Rows are cut to the
    window where every column exists.
    """
    if lags_per_input < 1:
        raise InvalidInputError("lags_per_input must be at least 1")
    y = as_series(y).values
    bases = {name: as_series(s).values for name, s in inputs.items()}
    for name, v in bases.items():
        if v.size != y.size:
            raise InvalidInputError(f"input {name!r} has length {v.size}, response has {y.size}")
    terms = [Term(((name, 0),)) for name in bases]
    for p in products:
        terms.append(p if isinstance(p, Term) else Term.parse(p))
    specs = []
    for term in terms:
        for name, _ in term.factors:
            if name not in bases:
                raise InvalidInputError(f"term {term.name!r} refers to unknown input {name!r}")
        start = term.lead
        specs.extend(term.shifted(start + k) for k in range(lags_per_input))
    depth = max(-o for s in specs for _, o in s.factors)
    n = y.size - depth
    if n < 1:
        raise InvalidInputError(f"series of length {y.size} too short for lag depth {depth}")
    columns = {}
    for s in specs:
        if s.name in columns:
            raise InvalidInputError(f"duplicate covariate {s.name!r}")
        col = np.ones(n)
        for name, o in s.factors:
            col = col * bases[name][depth + o : depth + o + n]
        columns[s.name] = col
    return LagDesign(y[depth:], columns, intercept)


@dataclass(frozen=True, eq=False)
class FitResult:
    """OLS estimates with standard errors and two-sided t-test p-values."""

    names: List[str]
    estimates: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    aic: float
    rss: float
    residual_variance: float
    n: int
    p: int
    perfect_fit: bool = False

    def coef(self, name: str) -> float:
        return float(self.estimates[self.names.index(name)])

    def row(self, name: str) -> Tuple[float, float, float]:
        i = self.names.index(name)
        return float(self.estimates[i]), float(self.std_errors[i]), float(self.p_values[i])

    def significant(self, alpha: float = 0.05, include_intercept: bool = False) -> List[str]:
        return [
            c for c, pv in zip(self.names, self.p_values)
            if pv < alpha and (include_intercept or c != INTERCEPT)
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "estimate", "se", "p_value"])
        for c, e, s, pv in zip(self.names, self.estimates, self.std_errors, self.p_values):
            w.writerow([c, repr(float(e)), repr(float(s)), repr(float(pv))])
        return buf.getvalue()

    def to_text(self) -> str:
        """Fixed-width table with Estimate, SE and p-value columns."""
        width = max([len(c) for c in self.names] + [9])
        lines = [f"{'':<{width}}  {'Estimate':>9}  {'SE':>7}  {'p-value':>7}"]
        lines.append("-" * len(lines[0]))
        for c, e, s, pv in zip(self.names, self.estimates, self.std_errors, self.p_values):
            lines.append(f"{c:<{width}}  {e:>9.4f}  {s:>7.4f}  {pv:>7.4f}")
        lines.append("-" * len(lines[0]))
        lines.append(f"n = {self.n}, p = {self.p}, AIC = {self.aic:.4f}" + (" (perfect fit)" if self.perfect_fit else ""))
        return "\n".join(lines)


def _collinear_columns(x: np.ndarray, labels: List[str], tol: float) -> List[str]:
    """Columns lying (numerically) in the span of the columns before them."""
    bad, kept = [], []
    for j in range(x.shape[1]):
        col = x[:, j]
        norm = np.linalg.norm(col)
        if kept:
            basis = x[:, kept]
            coef, *_ = np.linalg.lstsq(basis, col, rcond=None)
            resid = np.linalg.norm(col - basis @ coef)
        else:
            resid = norm
        if norm == 0 or resid <= tol * norm:
            bad.append(labels[j])
        else:
            kept.append(j)
    return bad


def _fit(x: np.ndarray, y: np.ndarray, labels: List[str]) -> FitResult:
    n, p = x.shape
    if n <= p:
        raise InvalidInputError(f"need more rows ({n}) than coefficients ({p})")
    if p:
        q, r = np.linalg.qr(x)
        sv = np.linalg.svd(r, compute_uv=False)
        tol = max(n, p) * np.finfo(float).eps * 1e3
        if sv[-1] <= tol * sv[0]:
            bad = _collinear_columns(x, labels, 1e-8)
            raise CollinearDesignError(f"design is rank deficient; collinear columns: {bad}", bad)
        beta = np.linalg.solve(r, q.T @ y)
        resid = y - x @ beta
    else:
        beta = np.empty(0)
        resid = y
    rss = float(resid @ resid)
    df = n - p
    perfect = rss <= 1e-24 * max(float(y @ y), 1e-300)
    if perfect:
        se = np.full(p, np.nan)
        tv = np.full(p, np.nan)
        pv = np.full(p, np.nan)
        sigma2 = 0.0
        aic = -np.inf
    else:
        sigma2 = rss / df
        rinv = np.linalg.inv(r) if p else np.empty((0, 0))
        se = np.sqrt(sigma2 * np.sum(rinv**2, axis=1))
        tv = beta / se
        pv = 2 * stats.t.sf(np.abs(tv), df)
        aic = n * np.log(rss / n) + 2 * (p + 1)
    return FitResult(list(labels), beta, se, tv, pv, float(aic), rss, sigma2, n, p, bool(perfect))


def ols_fit(design: LagDesign, names: Optional[Sequence[str]] = None) -> FitResult:
    """Least-squares fit of the response on the named columns (all by default).

    ``AIC = n log(RSS / n) + 2 (p + 1)`` with ``p`` counting the intercept.
    An exact fit is flagged with ``perfect_fit`` and NaN standard errors.

    Raises
    ------
    CollinearDesignError
        If the design matrix is rank deficient.
    """
    x, labels = design.matrix(names)
    return _fit(x, np.asarray(design.response, dtype=float), labels)


def stepwise_aic(design: LagDesign, direction: str = "both", max_steps: int = 1000) -> FitResult:
    """Stepwise AIC search over the design's covariates.

    ``"both"`` and ``"backward"`` start from the full model, ``"forward"``
    from the intercept-only model.  Each step moves to the neighbour
    (one deletion or one re-addition) with the lowest AIC, provided it beats
    the current model; ties go to deletions before additions, then column
    order.  The intercept is never dropped.
    """
    if direction not in ("both", "backward", "forward"):
        raise InvalidInputError(f"direction must be both, backward or forward, got {direction!r}")
    order = design.names
    current = [] if direction == "forward" else list(order)
    best = ols_fit(design, current)
    for _ in range(max_steps):
        moves = []
        if direction != "forward":
            moves += [[c for c in current if c != drop] for drop in current]
        if direction != "backward":
            moves += [
                [c for c in order if c in current or c == add]
                for add in order if add not in current
            ]
        candidate, cand_fit = None, None
        for names in moves:
            fit = ols_fit(design, names)
            if cand_fit is None or fit.aic < cand_fit.aic:
                candidate, cand_fit = names, fit
        if cand_fit is None or not cand_fit.aic < best.aic:
            break
        current, best = candidate, cand_fit
    return best
