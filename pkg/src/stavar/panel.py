"""Panel data model, CSV ingestion and sparsity patterns.

Outcomes live in an ``n x T`` matrix on a contiguous integer time grid.
Treatment is irreversible, so a single adoption time per unit encodes the
whole treatment path: unit ``i`` is treated at time ``t`` iff
``t >= adopt_time[i]``.  Never-treated units carry the :data:`NEVER`
sentinel.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadAdoptTime,
    ConstantColumn,
    DataError,
    InvalidConfig,
    MissingCell,
    MissingValue,
    UnknownUnit,
)

NEVER = 10**9
_NEVER_TOKEN = "never"


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PanelData:
    """Outcomes for ``n`` units over ``T`` consecutive integer times.

    Parameters
    ----------
    unit_ids : sequence of str
        Unique unit labels, in row order of ``outcomes``.
    times : (T,) int array
        Contiguous, increasing time index.
    outcomes : (n, T) float array
    adopt_time : (n,) int array
        Adoption time of each unit in the units of ``times``; ``NEVER`` for
        pure controls.
    """

    unit_ids: tuple
    times: np.ndarray
    outcomes: np.ndarray
    adopt_time: np.ndarray

    def __post_init__(self):
        ids = tuple(str(u) for u in self.unit_ids)
        times = _frozen(self.times, dtype=np.int64)
        y = _frozen(self.outcomes, dtype=float)
        adopt = _frozen(self.adopt_time, dtype=np.int64)
        object.__setattr__(self, "unit_ids", ids)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "adopt_time", adopt)

        if len(set(ids)) != len(ids):
            raise DataError("unit_ids must be unique")
        n, T = len(ids), len(times)
        if n < 2 or T < 3:
            raise DataError(f"need n >= 2 and T >= 3, got n={n}, T={T}")
        if y.shape != (n, T):
            raise DataError(f"outcomes shape {y.shape} != ({n}, {T})")
        if adopt.shape != (n,):
            raise DataError("adopt_time must have one entry per unit")
        if np.any(np.diff(times) != 1):
            raise MissingCell("time grid must be contiguous integers")
        if not np.all(np.isfinite(y)):
            raise MissingCell("outcomes contain missing or non-finite cells")
        treated = adopt != NEVER
        bad = treated & ((adopt < times[0] + 1) | (adopt > times[-1]))
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise BadAdoptTime(
                f"unit {ids[i]!r}: adopt_time {adopt[i]} outside "
                f"[{times[0] + 1}, {times[-1]}]"
            )

    @property
    def n(self) -> int:
        return len(self.unit_ids)

    @property
    def T(self) -> int:
        return len(self.times)

    @property
    def treated(self) -> np.ndarray:
        return self.adopt_time != NEVER

    @property
    def adopt_pos(self) -> np.ndarray:
        """0-based grid position of adoption (``NEVER`` kept for controls)."""
        return np.where(self.treated, self.adopt_time - self.times[0], NEVER)

    @property
    def t_min(self) -> int:
        """Earliest adoption time among treated units."""
        if not self.treated.any():
            raise DataError("panel has no treated units")
        return int(self.adopt_time[self.treated].min())

    @property
    def p_min(self) -> int:
        """Grid position of :attr:`t_min`."""
        return self.t_min - int(self.times[0])

    def untreated(self) -> np.ndarray:
        """``(T, n)`` boolean: unit untreated at each grid time."""
        pos = np.arange(self.T)[:, None]
        return pos < self.adopt_pos[None, :]

    def index_of(self, unit) -> int:
        return self.unit_ids.index(str(unit))

    def with_outcomes(self, outcomes) -> "PanelData":
        return PanelData(self.unit_ids, self.times, outcomes, self.adopt_time)


@dataclass(frozen=True, eq=False)
class CovariateMatrix:
    """Unit-level covariates, rows aligned with ``PanelData.unit_ids``."""

    values: np.ndarray
    names: tuple

    def __post_init__(self):
        x = _frozen(self.values, dtype=float)
        if x.ndim != 2:
            raise DataError("covariates must be a 2-d matrix")
        names = tuple(str(s) for s in self.names)
        if x.shape[1] != len(names) or x.shape[1] < 1:
            raise DataError("need one name per covariate column and p >= 1")
        if not np.all(np.isfinite(x)):
            raise MissingValue("covariates contain missing values")
        const = np.ptp(x, axis=0) == 0
        if np.any(const):
            raise ConstantColumn(
                f"constant covariate column(s): "
                f"{[names[j] for j in np.flatnonzero(const)]}"
            )
        object.__setattr__(self, "values", x)
        object.__setattr__(self, "names", names)

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NeighborGraph:
    """Undirected neighbour graph over unit ids (no self loops)."""

    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        clean = set()
        for e in self.edges:
            a, b = (str(u) for u in e)
            if a == b:
                raise DataError(f"self-loop on unit {a!r}")
            clean.add(tuple(sorted((a, b))))
        object.__setattr__(self, "edges", frozenset(clean))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence]) -> "NeighborGraph":
        return cls(frozenset(tuple(p) for p in pairs))

    def check_units(self, unit_ids) -> None:
        known = set(unit_ids)
        for a, b in self.edges:
            for u in (a, b):
                if u not in known:
                    raise UnknownUnit(f"edge endpoint {u!r} is not a panel unit")

    def adjacency(self, unit_ids) -> np.ndarray:
        self.check_units(unit_ids)
        idx = {u: i for i, u in enumerate(unit_ids)}
        adj = np.zeros((len(unit_ids), len(unit_ids)), dtype=bool)
        for a, b in self.edges:
            adj[idx[a], idx[b]] = adj[idx[b], idx[a]] = True
        return adj


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    """Allowed nonzeros of the lag matrix ``A`` and precision ``Omega``.

    ``adoption_gap`` is metadata recording the rule used to derive the
    masks (``None`` for hand-built patterns).
    """

    a_mask: np.ndarray
    omega_mask: np.ndarray
    adoption_gap: float | None = None

    def __post_init__(self):
        a = _frozen(self.a_mask, dtype=bool)
        om = _frozen(self.omega_mask, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or om.shape != a.shape:
            raise DataError("masks must be square and of equal shape")
        if not np.array_equal(om, om.T):
            raise DataError("omega_mask must be symmetric")
        if not om.diagonal().all():
            raise DataError("omega_mask diagonal must be all true")
        object.__setattr__(self, "a_mask", a)
        object.__setattr__(self, "omega_mask", om)

    @property
    def n(self) -> int:
        return self.a_mask.shape[0]

    @property
    def q_max(self) -> int:
        return int(self.a_mask.sum(axis=1).max())

    def a_support(self):
        """(rows, cols) of allowed ``A`` entries in row-major order."""
        return np.nonzero(self.a_mask)


def build_sparsity(panel: PanelData, graph: NeighborGraph,
                   adoption_gap: float = 12) -> SparsityPattern:
    """Derive ``A`` and ``Omega`` masks from neighbours and adoption times.

    ``A[i, j]`` may be nonzero only on the diagonal or between neighbours
    whose adoption times differ by at most ``adoption_gap``.  ``Omega``
    follows the neighbour graph alone.
    """
    if adoption_gap < 0:
        raise InvalidConfig("adoption_gap must be >= 0")
    adj = graph.adjacency(panel.unit_ids)
    eye = np.eye(panel.n, dtype=bool)
    adopt = panel.adopt_time.astype(float)
    adopt[~panel.treated] = np.inf
    with np.errstate(invalid="ignore"):
        gap = np.abs(adopt[:, None] - adopt[None, :])
    # two never-treated units: inf - inf is nan, treat as same schedule
    both_never = ~panel.treated[:, None] & ~panel.treated[None, :]
    close = np.where(both_never, True, gap <= adoption_gap)
    return SparsityPattern(eye | (adj & close), eye | adj,
                           adoption_gap=float(adoption_gap))


# --- CSV I/O ---------------------------------------------------------------

def _read_rows(path, required):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path.name}: missing columns {missing}")
        return header, list(reader)


def _parse_float(text, where):
    if text is None or text.strip() == "":
        raise MissingValue(f"empty value at {where}")
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"non-numeric value {text!r} at {where}") from None
    if not math.isfinite(v):
        raise MissingValue(f"non-finite value at {where}")
    return v


def load_panel(outcome_file, treatment_file) -> PanelData:
    """Read the outcomes and treatment CSVs into a validated panel."""
    _, rows = _read_rows(outcome_file, ("unit_id", "time", "outcome"))
    cells = {}
    order = []
    for k, r in enumerate(rows, start=2):
        u = r["unit_id"]
        try:
            t = int(r["time"])
        except ValueError:
            raise DataError(f"line {k}: bad time {r['time']!r}") from None
        if t < 1:
            raise DataError(f"line {k}: time must be a positive integer")
        if u not in cells:
            cells[u] = {}
            order.append(u)
        if t in cells[u]:
            raise DataError(f"line {k}: duplicate cell ({u}, {t})")
        cells[u][t] = _parse_float(r["outcome"], f"line {k}")
    if not order:
        raise DataError("outcomes file is empty")

    all_t = sorted({t for c in cells.values() for t in c})
    times = np.arange(all_t[0], all_t[-1] + 1)
    y = np.empty((len(order), len(times)))
    for i, u in enumerate(order):
        for j, t in enumerate(times):
            if t not in cells[u]:
                raise MissingCell(f"unit {u!r} has no outcome at time {t}")
            y[i, j] = cells[u][t]

    _, trows = _read_rows(treatment_file, ("unit_id", "adopt_time"))
    adopt = {}
    for k, r in enumerate(trows, start=2):
        u = r["unit_id"]
        if u not in cells:
            raise UnknownUnit(f"treatment line {k}: unknown unit {u!r}")
        tok = r["adopt_time"].strip()
        if tok.lower() == _NEVER_TOKEN:
            adopt[u] = NEVER
        else:
            try:
                adopt[u] = int(tok)
            except ValueError:
                raise BadAdoptTime(f"treatment line {k}: {tok!r}") from None
    missing = [u for u in order if u not in adopt]
    if missing:
        raise UnknownUnit(f"units without a treatment row: {missing}")
    return PanelData(tuple(order), times, y, [adopt[u] for u in order])


def write_panel(panel: PanelData, outcome_file, treatment_file) -> None:
    """Inverse of :func:`load_panel`; floats are written round-trip exact."""
    with Path(outcome_file).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", "time", "outcome"])
        for i, u in enumerate(panel.unit_ids):
            for j, t in enumerate(panel.times):
                w.writerow([u, int(t), repr(float(panel.outcomes[i, j]))])
    with Path(treatment_file).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", "adopt_time"])
        for u, a in zip(panel.unit_ids, panel.adopt_time):
            w.writerow([u, _NEVER_TOKEN if a == NEVER else int(a)])


def load_covariates(file, panel: PanelData) -> CovariateMatrix:
    """Read the covariates CSV, reordering rows to match the panel."""
    header, rows = _read_rows(file, ("unit_id",))
    names = [h for h in header if h != "unit_id"]
    if not names:
        raise DataError("covariates file has no covariate columns")
    by_unit = {}
    for k, r in enumerate(rows, start=2):
        u = r["unit_id"]
        if u not in panel.unit_ids:
            raise UnknownUnit(f"covariates line {k}: unknown unit {u!r}")
        by_unit[u] = [_parse_float(r[c], f"line {k}, column {c}") for c in names]
    missing = [u for u in panel.unit_ids if u not in by_unit]
    if missing:
        raise MissingValue(f"no covariates for units {missing}")
    return CovariateMatrix(np.array([by_unit[u] for u in panel.unit_ids]), names)


def write_covariates(covs: CovariateMatrix, unit_ids, file) -> None:
    with Path(file).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", *covs.names])
        for u, row in zip(unit_ids, covs.values):
            w.writerow([u, *(repr(float(v)) for v in row)])


def load_edges(file, panel: PanelData | None = None) -> NeighborGraph:
    """Read an undirected edge list; duplicates and orientation are ignored."""
    _, rows = _read_rows(file, ("unit_a", "unit_b"))
    graph = NeighborGraph.from_pairs((r["unit_a"], r["unit_b"]) for r in rows)
    if panel is not None:
        graph.check_units(panel.unit_ids)
    return graph


def write_edges(graph: NeighborGraph, file) -> None:
    with Path(file).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_a", "unit_b"])
        for a, b in sorted(graph.edges):
            w.writerow([a, b])
