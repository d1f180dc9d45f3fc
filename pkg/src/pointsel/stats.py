"""Experiment analysis.

Per-condition accuracy and selection-time summaries, target/selected
confusion matrices, and a two-factor repeated-measures ANOVA (both factors
within-subject, 2 levels each) with exact F-distribution p-values via the
regularized incomplete beta function.

Notes on conventions: standard deviations use the sample (n-1) denominator;
trials with no selection count as errors, not exclusions. Sphericity
corrections are moot for 2-level factors (all effect dfs are 1).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from pointsel.hand import PointingMode


class BalancedDesignError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Condition:
    mode: PointingMode
    feedback: bool

    @property
    def label(self) -> str:
        return f"{self.mode.value}/{'on' if self.feedback else 'off'}"


ALL_CONDITIONS = tuple(
    Condition(mode, fb)
    for mode in (PointingMode.FINGER_LINE, PointingMode.WRIST_LINE)
    for fb in (True, False)
)


@dataclass(frozen=True)
class TrialRecord:
    participant: int
    condition: Condition
    target: int
    selected: Optional[int]
    time_s: float

    def __post_init__(self):
        if self.time_s <= 0:
            raise ValueError(f"selection time must be positive, got {self.time_s}")

    @property
    def correct(self) -> bool:
        return self.selected == self.target


# ---------------------------------------------------------------------------
# F distribution via the regularized incomplete beta function


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 500):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-14:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b), relative error well under 1e-10."""
    if a <= 0 or b <= 0:
        raise ValueError(f"shape parameters must be positive, got a={a} b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Continued fraction converges fast for x below the distribution's bulk;
    # use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) on the other side.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_survival(f_stat: float, df1: float, df2: float) -> float:
    """P(F >= f_stat) for an F(df1, df2) variate."""
    if df1 < 1 or df2 < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got df1={df1} df2={df2}")
    if f_stat < 0:
        raise ValueError(f"F statistic must be non-negative, got {f_stat}")
    x = df2 / (df2 + df1 * f_stat)
    return betainc_reg(df2 / 2.0, df1 / 2.0, x)


# ---------------------------------------------------------------------------
# Accuracy / time tables


def _check_balanced(records: Sequence[TrialRecord]) -> list[int]:
    participants = sorted({r.participant for r in records})
    if not participants:
        raise BalancedDesignError("no records")
    seen = {(r.participant, r.condition) for r in records}
    for p in participants:
        missing = [c.label for c in ALL_CONDITIONS if (p, c) not in seen]
        if missing:
            raise BalancedDesignError(f"participant {p} missing conditions: {missing}")
    return participants


def per_participant_accuracy(records: Sequence[TrialRecord]) -> tuple[list[int], np.ndarray]:
    """(participants, accuracy array of shape (n, 2, 2)).

    Axis 1 is pointing mode (finger, wrist); axis 2 is feedback (on, off).
    Raises BalancedDesignError when any cell is empty for any participant.
    """
    participants = _check_balanced(records)
    modes = (PointingMode.FINGER_LINE, PointingMode.WRIST_LINE)
    acc = np.zeros((len(participants), 2, 2))
    for pi, p in enumerate(participants):
        for mi, mode in enumerate(modes):
            for fi, fb in enumerate((True, False)):
                cell = [r for r in records if r.participant == p and r.condition == Condition(mode, fb)]
                acc[pi, mi, fi] = sum(r.correct for r in cell) / len(cell)
    return participants, acc


def _cell_stats(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return mean, sd


def accuracy_table(records: Sequence[TrialRecord]) -> dict[Condition, tuple[float, float]]:
    """Per-condition (mean, sample sd) of per-participant accuracy."""
    _, acc = per_participant_accuracy(records)
    modes = (PointingMode.FINGER_LINE, PointingMode.WRIST_LINE)
    out = {}
    for mi, mode in enumerate(modes):
        for fi, fb in enumerate((True, False)):
            out[Condition(mode, fb)] = _cell_stats(acc[:, mi, fi])
    return out


def selection_time_summary(records: Sequence[TrialRecord]) -> dict[Condition, tuple[float, float]]:
    """Per-condition (mean, sample sd) of per-participant mean selection time."""
    participants = _check_balanced(records)
    out = {}
    for cond in ALL_CONDITIONS:
        per_p = []
        for p in participants:
            times = [r.time_s for r in records if r.participant == p and r.condition == cond]
            per_p.append(sum(times) / len(times))
        out[cond] = _cell_stats(np.array(per_p))
    return out


# ---------------------------------------------------------------------------
# Confusion matrix


@dataclass(frozen=True)
class ConfusionMatrix:
    targets: tuple[int, ...]  # row/column object ids, sorted
    counts: np.ndarray  # (N, N+1); last column = no selection

    @property
    def accuracy(self) -> float:
        total = self.counts.sum()
        if total == 0:
            return 0.0
        return float(np.trace(self.counts[:, : len(self.targets)])) / float(total)

    def row(self, target: int) -> np.ndarray:
        return self.counts[self.targets.index(target)]


def confusion(
    records: Sequence[TrialRecord], condition: Optional[Condition] = None
) -> ConfusionMatrix:
    if condition is not None:
        records = [r for r in records if r.condition == condition]
    ids = sorted({r.target for r in records} | {r.selected for r in records if r.selected is not None})
    idx = {oid: i for i, oid in enumerate(ids)}
    counts = np.zeros((len(ids), len(ids) + 1), dtype=np.int64)
    for r in records:
        col = idx[r.selected] if r.selected is not None else len(ids)
        counts[idx[r.target], col] += 1
    return ConfusionMatrix(tuple(ids), counts)


# ---------------------------------------------------------------------------
# Two-factor repeated-measures ANOVA


@dataclass(frozen=True)
class EffectResult:
    ss: float
    df: int
    ms: float
    f: Optional[float]
    p: Optional[float]


@dataclass(frozen=True)
class ErrorStratum:
    ss: float
    df: int
    ms: float


@dataclass(frozen=True)
class AnovaResult:
    effects: dict[str, EffectResult]  # "A" (mode), "B" (feedback), "AxB"
    errors: dict[str, ErrorStratum]  # "AxS", "BxS", "AxBxS"
    ss_subjects: float
    ss_total: float
    n_participants: int


def rm_anova2(table: np.ndarray) -> AnovaResult:
    """Fully within-subject two-factor ANOVA on an (n, 2, 2) cell table.

    Axis 1 = factor A (pointing mode), axis 2 = factor B (feedback). Each
    effect is tested against its interaction-with-subjects stratum. Uses the
    computational totals formulas; the test suite cross-checks against the
    mean-deviation route.
    """
    y = np.asarray(table, dtype=np.float64)
    if y.ndim != 3 or y.shape[1:] != (2, 2):
        raise BalancedDesignError(f"expected an (n, 2, 2) table, got shape {y.shape}")
    n = y.shape[0]
    if n < 2:
        raise BalancedDesignError("need at least 2 participants")
    if not np.isfinite(y).all():
        raise BalancedDesignError("table contains non-finite cells")
    a = b = 2

    def nonneg(ss: float) -> float:
        # Sums of squares are mathematically >= 0; differences of large totals
        # can land a hair below zero in floating point.
        return max(float(ss), 0.0)

    cf = y.sum() ** 2 / (n * a * b)
    ss_total = nonneg((y**2).sum() - cf)
    ss_subj = nonneg((y.sum(axis=(1, 2)) ** 2).sum() / (a * b) - cf)
    ss_a = nonneg((y.sum(axis=(0, 2)) ** 2).sum() / (n * b) - cf)
    ss_b = nonneg((y.sum(axis=(0, 1)) ** 2).sum() / (n * a) - cf)
    ss_ab = nonneg((y.sum(axis=0) ** 2).sum() / n - cf - ss_a - ss_b)
    ss_as = nonneg((y.sum(axis=2) ** 2).sum() / b - cf - ss_a - ss_subj)
    ss_bs = nonneg((y.sum(axis=1) ** 2).sum() / a - cf - ss_b - ss_subj)
    ss_abs = nonneg(ss_total - ss_subj - ss_a - ss_b - ss_ab - ss_as - ss_bs)

    df_eff = 1
    df_err = n - 1

    def effect(ss_effect: float, ss_error: float) -> EffectResult:
        ms_eff = ss_effect / df_eff
        ms_err = ss_error / df_err
        if ms_err <= 0.0:
            return EffectResult(ss_effect, df_eff, ms_eff, None, None)
        f = ms_eff / ms_err
        return EffectResult(ss_effect, df_eff, ms_eff, f, f_survival(f, df_eff, df_err))

    effects = {
        "A": effect(ss_a, ss_as),
        "B": effect(ss_b, ss_bs),
        "AxB": effect(ss_ab, ss_abs),
    }
    errors = {
        "AxS": ErrorStratum(ss_as, df_err, ss_as / df_err),
        "BxS": ErrorStratum(ss_bs, df_err, ss_bs / df_err),
        "AxBxS": ErrorStratum(ss_abs, df_err, ss_abs / df_err),
    }
    return AnovaResult(effects, errors, ss_subj, ss_total, n)


# ---------------------------------------------------------------------------
# Trial table CSV and reports

CSV_HEADER = ["participant", "mode", "feedback", "target", "selected", "time_s"]


def write_trial_csv(records: Iterable[TrialRecord], path: str):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(
                [
                    r.participant,
                    r.condition.mode.value,
                    "on" if r.condition.feedback else "off",
                    r.target,
                    "" if r.selected is None else r.selected,
                    repr(r.time_s),  # shortest round-tripping decimal form
                ]
            )


def read_trial_csv(path: str) -> list[TrialRecord]:
    records = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected trial CSV header: {reader.fieldnames}")
        for row in reader:
            records.append(
                TrialRecord(
                    participant=int(row["participant"]),
                    condition=Condition(PointingMode(row["mode"]), row["feedback"] == "on"),
                    target=int(row["target"]),
                    selected=int(row["selected"]) if row["selected"] != "" else None,
                    time_s=float(row["time_s"]),
                )
            )
    return records


def format_accuracy_table(cells: dict[Condition, tuple[float, float]]) -> str:
    """Aligned-text table in the conventional 4-row shape."""
    lines = [f"{'Pointing line':<15}{'Feedback':<10}{'Mean':>8}{'Std dev':>10}"]
    for cond in ALL_CONDITIONS:
        mean, sd = cells[cond]
        mode = "Finger" if cond.mode is PointingMode.FINGER_LINE else "Wrist"
        fb = "On" if cond.feedback else "Off"
        lines.append(f"{mode:<15}{fb:<10}{mean * 100:>7.1f}%{sd * 100:>9.1f}%")
    return "\n".join(lines)


def anova_to_dict(result: AnovaResult) -> dict:
    return {
        "effects": {
            name: {"ss": e.ss, "df": e.df, "ms": e.ms, "F": e.f, "p": e.p}
            for name, e in result.effects.items()
        },
        "error_strata": {
            name: {"ss": s.ss, "df": s.df, "ms": s.ms} for name, s in result.errors.items()
        },
        "ss_subjects": result.ss_subjects,
        "ss_total": result.ss_total,
        "n_participants": result.n_participants,
    }


def format_anova(result: AnovaResult) -> str:
    names = {"A": "pointing line", "B": "feedback", "AxB": "interaction"}
    err_for = {"A": "AxS", "B": "BxS", "AxB": "AxBxS"}
    lines = [f"{'Effect':<16}{'SS':>12}{'df':>4}{'MS':>12}{'F':>10}{'p':>10}"]
    for key, e in result.effects.items():
        f = f"{e.f:.4f}" if e.f is not None else "n/a"
        p = f"{e.p:.4f}" if e.p is not None else "n/a"
        lines.append(f"{names[key]:<16}{e.ss:>12.6f}{e.df:>4}{e.ms:>12.6f}{f:>10}{p:>10}")
        s = result.errors[err_for[key]]
        lines.append(f"{'  error (' + err_for[key] + ')':<16}{s.ss:>12.6f}{s.df:>4}{s.ms:>12.6f}")
    return "\n".join(lines)


def anova_report_json(result: AnovaResult) -> str:
    return json.dumps(anova_to_dict(result), indent=2)
