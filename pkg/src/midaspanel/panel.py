"""Mixed-frequency panel data model, CSV ingestion, and window construction.

The on-disk format is a long CSV with columns (entity, period, subperiod,
variable, value) plus a JSON sidecar describing which variable is the
target, which are covariates (with their frequency ratios), and optional
consensus / known-offset / group-label metadata.  Missing target cells are
simply absent rows and are flagged, never dropped silently; missing
covariate cells are a hard error.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

__all__ = [
    "FrequencySpec",
    "CovariateStream",
    "PanelDataset",
    "InformationSet",
    "LaggedWindow",
    "WindowSet",
    "PanelFormatError",
    "InsufficientHistoryError",
    "load_panel",
    "write_panel",
    "write_panel_wide",
    "build_windows",
    "build_window_stack",
]


class PanelFormatError(ValueError):
    """Malformed or inconsistent panel input."""


class InsufficientHistoryError(ValueError):
    """Requested window reaches before the start of the observed sample."""


@dataclass(frozen=True)
class FrequencySpec:
    """Frequency ratio of one covariate stream.

    ``n_high`` high-frequency observations per low-frequency period and
    ``n_low_lags`` low-frequency periods of lags give ``k_max`` total
    high-frequency lags per window.
    """

    n_high: int
    n_low_lags: int

    def __post_init__(self):
        if self.n_high < 1 or self.n_low_lags < 1:
            raise ValueError("frequency fields must be positive integers")

    @property
    def k_max(self) -> int:
        return self.n_low_lags * self.n_high


@dataclass
class CovariateStream:
    """One high-frequency covariate: (N, T * n_high) values."""

    name: str
    freq: FrequencySpec
    values: np.ndarray


@dataclass
class InformationSet:
    """Information available when nowcasting ``target_period``.

    ``tau_fraction`` is the fraction of the target period's high-frequency
    data already observed: 0 is a pure forecast using data through the end
    of period t-1, 1/3 is one month of a quarter, 1 is the full period.
    It must be a multiple of 1/n_high for every covariate stream.
    """

    target_period: int
    tau_fraction: Fraction

    def __post_init__(self):
        frac = Fraction(self.tau_fraction).limit_denominator(10**9)
        if not 0 <= frac <= 1:
            raise ValueError("tau_fraction must lie in [0, 1]")
        self.tau_fraction = frac

    def high_freq_steps(self, n_high: int) -> int:
        steps = self.tau_fraction * n_high
        if steps.denominator != 1:
            raise ValueError(
                f"tau_fraction {self.tau_fraction} is not a multiple of 1/{n_high}"
            )
        return int(steps)


@dataclass
class LaggedWindow:
    """Covariate lag vectors (newest first) for one (entity, period)."""

    entity_id: str
    target_period: int
    target: float
    target_missing: bool
    lags: list
    ar: np.ndarray


class WindowSet:
    """Aligned windows for one or more target periods, stored columnar.

    Behaves as a sequence of :class:`LaggedWindow`; the fitting pipeline
    consumes the stacked arrays directly.
    """

    def __init__(self, entity_ids, entity_index, periods, y, y_missing, lags, ar,
                 ar_lags, tau_fraction, covariate_names):
        self.entity_ids = list(entity_ids)
        self.entity_index = np.asarray(entity_index, dtype=np.int64)
        self.periods = np.asarray(periods, dtype=np.int64)
        self.y = np.asarray(y, dtype=float)
        self.y_missing = np.asarray(y_missing, dtype=bool)
        self.lags = [np.asarray(m, dtype=float) for m in lags]
        self.ar = np.asarray(ar, dtype=float).reshape(len(self.y), ar_lags)
        self.ar_lags = ar_lags
        self.tau_fraction = tau_fraction
        self.covariate_names = list(covariate_names)

    def __len__(self) -> int:
        return len(self.y)

    def __getitem__(self, i: int) -> LaggedWindow:
        return LaggedWindow(
            entity_id=self.entity_ids[self.entity_index[i]],
            target_period=int(self.periods[i]),
            target=float(self.y[i]),
            target_missing=bool(self.y_missing[i]),
            lags=[m[i] for m in self.lags],
            ar=self.ar[i],
        )

    @staticmethod
    def concatenate(parts: list) -> "WindowSet":
        first = parts[0]
        return WindowSet(
            entity_ids=first.entity_ids,
            entity_index=np.concatenate([p.entity_index for p in parts]),
            periods=np.concatenate([p.periods for p in parts]),
            y=np.concatenate([p.y for p in parts]),
            y_missing=np.concatenate([p.y_missing for p in parts]),
            lags=[
                np.vstack([p.lags[k] for p in parts])
                for k in range(len(first.lags))
            ],
            ar=np.vstack([p.ar for p in parts]),
            ar_lags=first.ar_lags,
            tau_fraction=first.tau_fraction,
            covariate_names=first.covariate_names,
        )


@dataclass
class PanelDataset:
    """N entities observed over T low-frequency periods.

    ``targets`` holds NaN where a cell is missing; the mask in
    ``target_missing`` is authoritative.  Covariate streams are dense and
    validated to length T * n_high per entity.  Immutable by convention
    after construction: nothing in the library mutates a loaded panel, so
    instances are safe to share across parallel workers.
    """

    entity_ids: list
    targets: np.ndarray
    covariates: list
    target_missing: np.ndarray = None
    group_labels: dict = None
    known_offsets: np.ndarray = None
    consensus: np.ndarray = None
    period_labels: list = None

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=float)
        n, t = self.targets.shape
        if len(self.entity_ids) != n:
            raise PanelFormatError("entity_ids length does not match targets rows")
        if len(set(self.entity_ids)) != n:
            raise PanelFormatError("entity ids must be unique")
        if self.target_missing is None:
            self.target_missing = np.isnan(self.targets)
        self.target_missing = np.asarray(self.target_missing, dtype=bool)
        if self.target_missing.shape != (n, t):
            raise PanelFormatError("target mask shape mismatch")
        for stream in self.covariates:
            stream.values = np.asarray(stream.values, dtype=float)
            expected = t * stream.freq.n_high
            if stream.values.shape != (n, expected):
                raise PanelFormatError(
                    f"covariate {stream.name!r}: expected shape ({n}, {expected}), "
                    f"got {stream.values.shape}"
                )
            if np.isnan(stream.values).any():
                raise PanelFormatError(
                    f"covariate {stream.name!r} has missing cells; covariate "
                    "values must be complete"
                )
        if self.group_labels is not None:
            missing = [e for e in self.entity_ids if e not in self.group_labels]
            if missing:
                raise PanelFormatError(
                    f"group labels missing for entities: {missing[:5]}"
                )
        for name in ("known_offsets", "consensus"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != (n, t):
                    raise PanelFormatError(f"{name} shape mismatch")
                setattr(self, name, arr)
        if self.period_labels is None:
            self.period_labels = list(range(1, t + 1))

    @property
    def n_entities(self) -> int:
        return self.targets.shape[0]

    @property
    def n_periods(self) -> int:
        return self.targets.shape[1]

    def covariate(self, name: str) -> CovariateStream:
        for stream in self.covariates:
            if stream.name == name:
                return stream
        raise KeyError(name)

    def with_targets(self, targets: np.ndarray, missing=None) -> "PanelDataset":
        """Same panel with a different target matrix (shares covariates)."""
        return PanelDataset(
            entity_ids=self.entity_ids,
            targets=targets,
            covariates=self.covariates,
            target_missing=missing,
            group_labels=self.group_labels,
            known_offsets=self.known_offsets,
            consensus=self.consensus,
            period_labels=self.period_labels,
        )


# ---------------------------------------------------------------------------
# CSV ingestion


def _load_schema(schema) -> dict:
    if isinstance(schema, (str, Path)):
        with open(schema) as fh:
            schema = json.load(fh)
    if not isinstance(schema, dict):
        raise PanelFormatError("schema must be a mapping or a path to a JSON file")
    for key in ("target", "covariates"):
        if key not in schema:
            raise PanelFormatError(f"schema is missing required key {key!r}")
    return schema


_COLUMNS = ("entity", "period", "subperiod", "variable", "value")


def load_panel(path, schema) -> PanelDataset:
    """Read a long-format CSV into a validated :class:`PanelDataset`.

    Every malformed row is reported with its 1-based line number.
    Duplicate (entity, period, subperiod, variable) keys and covariate
    streams of the wrong length are rejected.
    """
    schema = _load_schema(schema)
    colmap = schema.get("columns", {c: c for c in _COLUMNS})
    target_var = schema["target"]
    cov_specs = {
        name: FrequencySpec(int(fs["n_high"]), int(fs["n_low_lags"]))
        for name, fs in schema["covariates"].items()
    }
    consensus_var = schema.get("consensus")
    offset_var = schema.get("known_offset")

    low_vars = {target_var}
    if consensus_var:
        low_vars.add(consensus_var)
    if offset_var:
        low_vars.add(offset_var)

    low_cells = {}   # (entity, period, variable) -> value
    high_cells = {}  # (entity, period, subperiod, variable) -> value
    entities_seen = []
    periods_seen = set()

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing_cols = [c for c in _COLUMNS if colmap.get(c, c) not in reader.fieldnames]
        if missing_cols:
            raise PanelFormatError(f"CSV is missing columns: {missing_cols}")
        for lineno, row in enumerate(reader, start=2):
            entity = row[colmap.get("entity", "entity")].strip()
            variable = row[colmap.get("variable", "variable")].strip()
            raw_period = row[colmap.get("period", "period")].strip()
            raw_sub = row[colmap.get("subperiod", "subperiod")].strip()
            raw_value = row[colmap.get("value", "value")].strip()
            if not entity or not variable:
                raise PanelFormatError(f"line {lineno}: empty entity or variable")
            try:
                period = int(raw_period)
            except ValueError:
                raise PanelFormatError(
                    f"line {lineno}: period {raw_period!r} is not an integer"
                ) from None
            try:
                value = float(raw_value)
            except ValueError:
                raise PanelFormatError(
                    f"line {lineno}: value {raw_value!r} is not numeric"
                ) from None
            if entity not in entities_seen:
                entities_seen.append(entity)
            periods_seen.add(period)
            if variable in low_vars:
                key = (entity, period, variable)
                if key in low_cells:
                    raise PanelFormatError(
                        f"line {lineno}: duplicate entry for entity {entity!r}, "
                        f"period {period}, variable {variable!r}"
                    )
                low_cells[key] = value
            elif variable in cov_specs:
                try:
                    sub = int(raw_sub)
                except ValueError:
                    raise PanelFormatError(
                        f"line {lineno}: covariate row needs an integer subperiod, "
                        f"got {raw_sub!r}"
                    ) from None
                key = (entity, period, sub, variable)
                if key in high_cells:
                    raise PanelFormatError(
                        f"line {lineno}: duplicate entry for entity {entity!r}, "
                        f"period {period}, subperiod {sub}, variable {variable!r}"
                    )
                high_cells[key] = value
            else:
                raise PanelFormatError(
                    f"line {lineno}: variable {variable!r} not declared in schema"
                )

    if not entities_seen:
        raise PanelFormatError("no data rows found")
    periods = sorted(periods_seen)
    n, t = len(entities_seen), len(periods)
    period_pos = {p: i for i, p in enumerate(periods)}

    targets = np.full((n, t), np.nan)
    consensus = np.full((n, t), np.nan) if consensus_var else None
    offsets = np.full((n, t), np.nan) if offset_var else None
    for (entity, period, variable), value in low_cells.items():
        i, j = entities_seen.index(entity), period_pos[period]
        if variable == target_var:
            targets[i, j] = value
        elif variable == consensus_var:
            consensus[i, j] = value
        elif variable == offset_var:
            offsets[i, j] = value

    streams = []
    for name, freq in cov_specs.items():
        values = np.full((n, t * freq.n_high), np.nan)
        count = 0
        for (entity, period, sub, variable), value in high_cells.items():
            if variable != name:
                continue
            if not 1 <= sub <= freq.n_high:
                raise PanelFormatError(
                    f"covariate {name!r}: subperiod {sub} outside 1..{freq.n_high} "
                    f"for entity {entity!r}, period {period}"
                )
            i = entities_seen.index(entity)
            j = period_pos[period] * freq.n_high + (sub - 1)
            values[i, j] = value
            count += 1
        expected = n * t * freq.n_high
        if count != expected:
            raise PanelFormatError(
                f"covariate {name!r}: got {count} values, expected {expected} "
                f"(= {n} entities x {t} periods x {freq.n_high})"
            )
        streams.append(CovariateStream(name=name, freq=freq, values=values))

    return PanelDataset(
        entity_ids=entities_seen,
        targets=targets,
        covariates=streams,
        group_labels=schema.get("group_labels"),
        known_offsets=offsets,
        consensus=consensus,
        period_labels=periods,
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_panel(data: PanelDataset, path, schema_path=None) -> None:
    """Write the long-format CSV (and optionally its schema sidecar).

    Missing target cells are omitted, matching how they are read back;
    finite values round-trip bit-exactly through the decimal text.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COLUMNS)
        for i, entity in enumerate(data.entity_ids):
            for j, period in enumerate(data.period_labels):
                if not data.target_missing[i, j]:
                    writer.writerow([entity, period, "", "y", _fmt(data.targets[i, j])])
                if data.consensus is not None and np.isfinite(data.consensus[i, j]):
                    writer.writerow([entity, period, "", "consensus", _fmt(data.consensus[i, j])])
                if data.known_offsets is not None and np.isfinite(data.known_offsets[i, j]):
                    writer.writerow([entity, period, "", "offset", _fmt(data.known_offsets[i, j])])
                for stream in data.covariates:
                    base = j * stream.freq.n_high
                    for m in range(stream.freq.n_high):
                        writer.writerow(
                            [entity, period, m + 1, stream.name, _fmt(stream.values[i, base + m])]
                        )
    if schema_path is not None:
        schema = {
            "columns": {c: c for c in _COLUMNS},
            "target": "y",
            "covariates": {
                s.name: {"n_high": s.freq.n_high, "n_low_lags": s.freq.n_low_lags}
                for s in data.covariates
            },
        }
        if data.consensus is not None:
            schema["consensus"] = "consensus"
        if data.known_offsets is not None:
            schema["known_offset"] = "offset"
        if data.group_labels is not None:
            schema["group_labels"] = data.group_labels
        with open(schema_path, "w") as fh:
            json.dump(schema, fh, indent=2, sort_keys=True)


def write_panel_wide(data: PanelDataset, path) -> None:
    """Wide per-entity export for eyeballing; one row per (entity, period)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["entity", "period", "y"]
        for stream in data.covariates:
            header += [f"{stream.name}.{m + 1}" for m in range(stream.freq.n_high)]
        writer.writerow(header)
        for i, entity in enumerate(data.entity_ids):
            for j, period in enumerate(data.period_labels):
                row = [entity, period,
                       "" if data.target_missing[i, j] else _fmt(data.targets[i, j])]
                for stream in data.covariates:
                    base = j * stream.freq.n_high
                    row += [_fmt(v) for v in stream.values[i, base : base + stream.freq.n_high]]
                writer.writerow(row)


# ---------------------------------------------------------------------------
# Window construction


def build_windows(data: PanelDataset, info: InformationSet, ar_lags: int = 0) -> WindowSet:
    """One lag window per entity for ``info.target_period``.

    Each covariate contributes its ``k_max`` most recent values at
    ``tau = (t - 1) + tau_fraction``, newest first; nothing dated after
    tau is touched.  Autoregressive target lags end at ``t - 1``.
    """
    t = info.target_period
    if not 1 <= t <= data.n_periods:
        raise InsufficientHistoryError(
            f"target period {t} outside the panel span 1..{data.n_periods}"
        )
    n = data.n_entities
    lags = []
    for stream in data.covariates:
        n_high = stream.freq.n_high
        k_max = stream.freq.k_max
        end = (t - 1) * n_high + info.high_freq_steps(n_high)
        if end - k_max < 0:
            first_usable = stream.freq.n_low_lags + 1 - info.tau_fraction
            raise InsufficientHistoryError(
                f"covariate {stream.name!r}: window for period {t} at "
                f"tau_fraction {info.tau_fraction} needs {k_max} lags but only "
                f"{end} observations precede tau; first usable period is "
                f"{int(np.ceil(float(first_usable)))}"
            )
        window = stream.values[:, end - k_max : end][:, ::-1]
        lags.append(np.ascontiguousarray(window))
    if ar_lags:
        if t - ar_lags < 1:
            raise InsufficientHistoryError(
                f"period {t} lacks {ar_lags} autoregressive target lags; "
                f"first usable period is {ar_lags + 1}"
            )
        ar = np.column_stack([data.targets[:, t - 1 - m] for m in range(1, ar_lags + 1)])
    else:
        ar = np.empty((n, 0))
    j = t - 1
    return WindowSet(
        entity_ids=data.entity_ids,
        entity_index=np.arange(n),
        periods=np.full(n, t),
        y=data.targets[:, j],
        y_missing=data.target_missing[:, j],
        lags=lags,
        ar=ar,
        ar_lags=ar_lags,
        tau_fraction=info.tau_fraction,
        covariate_names=[s.name for s in data.covariates],
    )


def build_window_stack(data: PanelDataset, periods, tau_fraction, ar_lags: int = 0) -> WindowSet:
    """Stack windows for several target periods at a common tau_fraction."""
    parts = [
        build_windows(data, InformationSet(int(t), Fraction(tau_fraction)), ar_lags)
        for t in periods
    ]
    if not parts:
        raise ValueError("no target periods supplied")
    return WindowSet.concatenate(parts)
