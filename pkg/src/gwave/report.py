"""Regularity reports and the three-valued verdict rule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

REGULAR = "Regular"
SINGULAR = "Singular"
INCONCLUSIVE = "Inconclusive"

SINGULAR_MARGIN = 0.5
MIN_TAIL = 4


def _num(v):
    """JSON-safe float (None for NaN, strings for infinities)."""
    if v is None:
        return None
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return round(v, 12)


@dataclass
class Row:
    m: int
    eps: np.ndarray
    sup: np.ndarray
    fitted_exponent: float
    required: float
    passed: bool | None
    margin: float = math.nan
    order: int | None = None
    alpha: int | None = None
    kind: str = "decay"
    note: str = ""

    def summary(self) -> dict:
        ok = np.isfinite(self.sup)
        s = self.sup[ok]
        return {
            "available": int(ok.sum()),
            "max": _num(s.max()) if s.size else None,
            "tail_value": _num(s[-1]) if s.size else None,
            "zeros": int((s == 0).sum()),
        }

    def to_dict(self) -> dict:
        d = {
            "m": self.m,
            "kind": self.kind,
            "fitted_exponent": _num(self.fitted_exponent),
            "required": _num(self.required),
            "order": self.order,
            "pass": self.passed,
            "margin": _num(self.margin),
            "sup_net": self.summary(),
        }
        if self.alpha is not None:
            d["alpha"] = self.alpha
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class RegularityReport:
    subject: dict
    mode: str
    rows: list
    verdict: str
    cutoff: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def regular(self) -> bool:
        return self.verdict == REGULAR

    @property
    def singular(self) -> bool:
        return self.verdict == SINGULAR

    def to_dict(self) -> dict:
        out = {
            "subject": self.subject,
            "mode": self.mode,
            "rows": [r.to_dict() for r in self.rows],
            "verdict": self.verdict,
            "cutoff": self.cutoff,
            "diagnostics": self.diagnostics,
        }
        if self.extra:
            out["extra"] = self.extra
        return out

    def curves(self) -> list:
        """(m, eps, sup, fitted_exponent) tuples for CSV export."""
        out = []
        for r in self.rows:
            for e, s in zip(r.eps, r.sup):
                out.append((r.m if r.alpha is None else f"{r.m}:{r.alpha}", float(e), float(s), r.fitted_exponent))
        return out


def decide(rows: list, margin: float = SINGULAR_MARGIN) -> str:
    """Regular iff every row passed; Singular iff a decisive failure."""
    if rows and all(r.passed is True for r in rows):
        return REGULAR
    if any(r.passed is False and r.margin >= margin for r in rows):
        return SINGULAR
    return INCONCLUSIVE
