"""Check records, their JSON/CSV serialization and the identity each check verifies."""

from __future__ import annotations

import csv
import io
import math
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Iterator

# check family -> identity being verified
ANCHORS: dict[str, str] = {
    "zero_divisor": "(1 + e123)(1 - e123) = 0 in R_3",
    "square_norm": "|(1 + e123)^2| = sqrt(8) in R_3",
    "cone_membership": "e3 + e12 lies outside the quadratic cone of R_3; quaternions lie inside",
    "clifford_norm_on_cone": "|x|_Cl = |x| for x in the quadratic cone",
    "spectrum": "sigma_S([[0,i],[j,0]]) = (-1/sqrt2 + S/sqrt2) u (1/sqrt2 + S/sqrt2)",
    "left_scalar_singular": "Delta_mu(A) invertible while mu Id - A is singular, and conversely at (1+i)/sqrt2",
    "qrr": "Q_phi_j(l)(A) = R_conj(l)(A_j) R_l(A_j)",
    "membership": "phi_j(l) in rho_S(A) iff l and conj(l) lie in rho(A_j)",
    "vertex_shift": "Delta_q(A - w) = Delta_(q+w)(A) and C_q(A - w) = C_(q+w)(A)",
    "q_from_c": "Q_p(A) = (C_(p^c)(A) - C_p(A)) (2 Im p)^(-1)",
    "resolvent_stem": "F1(z) + F2(z) j = C_phi_j(z)(A)",
    "laplace": "C_q(A)^(.k) = 1/(k-1)! int_0^inf T(t) t^(k-1) e^(-tq) dt",
    "laplace_bound": "||C_q(A)^(.k)|| <= M / (Re q - w)^k",
    "growth_precondition": "||T(t)|| <= M e^(w t) on a t-grid",
    "contour": "(1/2pi) int C_a(A) j^(-1) e^(ta) da = exp(tA)",
    "contour_invariance": "the contour integral does not depend on (j, r, eta)",
    "law": "T(p+q) = T(p) .p T(q) for commuting p, q",
    "pointwise_defect": "size of T(p+q) - T(p) T(q)",
    "exp_defect": "lim 2E(t)/t^2 = x^2 (pq - qp), E(t) = exp_tp^x(tq) - exp^x(t(p+q))",
    "not_slice": "q -> i q j violates the representation formula",
    "slice_accept": "induced values of constructed stems satisfy the representation formula",
    "cr_ratio": "centered Cauchy-Riemann residual of a holomorphic stem is O(h^2)",
    "slice_product": "slice product of power series = Cauchy product of coefficients",
    "yosida": "exp(t k A C_k(A)) x -> T(t) x as k grows",
    "growth": "||T(q)|| e^(-w Re q) bounded on a sector",
    "sectorial": "||C_q(A)|| |q - w| <= K on w + sector",
    "strong_continuity": "T(q) x -> x as q -> 0 in a sector",
    "restriction": "T2(t) = 0 for real t",
    "spectrum_circles": "Delta_q(A) is singular on every reported circle r + s S",
    "scan": "||C_q(A)|| and |q - w| ||C_q(A)|| over a sector grid",
    "quadrature": "quadrature reached its tolerance",
    "generator": "lim (T(h)x - x)/h = A x",
}


def anchor_for(check_id: str) -> str:
    family = check_id.split(".")[1] if check_id.count(".") >= 1 else check_id
    family = family.split("[")[0]
    return ANCHORS.get(family, ANCHORS.get(check_id.split("[")[0], ""))


@dataclass
class CheckRecord:
    check_id: str
    residual: float
    tol: float | None
    passed: bool
    anchor: str = ""
    operands: dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0
    diagnostic: bool = False

    def __post_init__(self):
        self.residual = float(self.residual)
        if not (self.residual >= 0 or math.isnan(self.residual)):
            raise ValueError(f"residual of {self.check_id} must be nonnegative")
        if not self.anchor:
            self.anchor = anchor_for(self.check_id)

    def to_json(self, timing: bool = False) -> dict:
        out = {
            "check_id": self.check_id,
            "anchor": self.anchor,
            "residual": _json_float(self.residual),
            "tol": None if self.tol is None else _json_float(self.tol),
            "pass": self.passed,
            "diagnostic": self.diagnostic,
            "operands": self.operands,
        }
        if timing:
            out["wall_time"] = self.wall_time
        return out


def _json_float(x: float):
    return x if math.isfinite(x) else repr(x)


class SemigroupReport:
    """Append-only collection of check records; safe to append from several threads."""

    def __init__(self, records: list[CheckRecord] | None = None):
        self.records: list[CheckRecord] = list(records or [])
        self._lock = threading.Lock()

    def add(self, record: CheckRecord) -> CheckRecord:
        with self._lock:
            self.records.append(record)
        return record

    def record(self, check_id: str, residual: float, tol: float | None, passed: bool | None = None,
               operands: dict | None = None, wall_time: float = 0.0, diagnostic: bool = False,
               anchor: str = "") -> CheckRecord:
        if passed is None:
            passed = bool(tol is not None and residual <= tol)
        return self.add(CheckRecord(check_id, residual, tol, bool(passed), anchor, operands or {},
                                    wall_time, diagnostic))

    def extend(self, other: "SemigroupReport") -> None:
        for r in other.records:
            self.add(r)

    @contextmanager
    def timed(self) -> Iterator[dict]:
        """Yields a dict; its 'elapsed' key is filled on exit."""
        box = {"start": time.perf_counter()}
        try:
            yield box
        finally:
            box["elapsed"] = time.perf_counter() - box["start"]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failures(self) -> list[CheckRecord]:
        return [r for r in self.sorted() if not r.passed]

    def sorted(self) -> list[CheckRecord]:
        return sorted(self.records, key=lambda r: r.check_id)

    def __getitem__(self, check_id: str) -> CheckRecord:
        for r in self.records:
            if r.check_id == check_id:
                return r
        raise KeyError(check_id)

    def __len__(self) -> int:
        return len(self.records)

    def to_json(self, timing: bool = False) -> dict:
        recs = self.sorted()
        return {
            "pass": self.passed,
            "checks": len(recs),
            "failures": sum(not r.passed for r in recs),
            "records": [r.to_json(timing) for r in recs],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["check_id", "residual", "tol", "pass"])
        for r in self.sorted():
            writer.writerow([r.check_id, repr(r.residual), "" if r.tol is None else repr(float(r.tol)),
                             "true" if r.passed else "false"])
        return buf.getvalue()
