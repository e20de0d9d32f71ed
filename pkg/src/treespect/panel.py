"""Multi-channel time-series container and its CSV / binary file formats."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

PANEL_MAGIC = b"RTSP"
# entries beyond this are refused in CSV form; use the binary format instead
CSV_ENTRY_LIMIT = 10**7


@dataclass(frozen=True)
class TimeSeriesPanel:
    """N-channel, T-sample real signal matrix, channel-major."""

    data: np.ndarray
    labels: tuple[str, ...]
    dt: float = 1.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        if data.ndim != 2:
            raise DataError("panel data must be 2-D (channels x samples)")
        n, t = data.shape
        if n < 2 or t < 1:
            raise DataError(f"panel needs >=2 channels and >=1 sample, got {n}x{t}")
        if len(self.labels) != n:
            raise DataError("label count does not match channel count")
        if len(set(self.labels)) != n:
            raise DataError("duplicate channel labels")
        if not np.all(np.isfinite(data)):
            raise DataError("panel contains non-finite samples")
        if self.dt <= 0:
            raise DataError("dt must be positive")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DataError(f"no channel labelled {label!r}") from None

    def channel(self, i: int) -> np.ndarray:
        return self.data[i]

    def with_channels(self, data: np.ndarray) -> "TimeSeriesPanel":
        return TimeSeriesPanel(data, self.labels, self.dt)


def save_panel_csv(panel: TimeSeriesPanel, path: str | Path) -> None:
    if panel.data.size > CSV_ENTRY_LIMIT:
        raise DataError(
            f"panel has {panel.data.size} entries; CSV is limited to "
            f"{CSV_ENTRY_LIMIT}, use the binary format"
        )
    header = ",".join(panel.labels)
    np.savetxt(path, panel.data.T, delimiter=",", header=header, comments="", fmt="%.17g")


def load_panel_csv(path: str | Path, dt: float = 1.0) -> TimeSeriesPanel:
    path = Path(path)
    with path.open() as fh:
        labels = [x.strip() for x in fh.readline().strip().split(",")]
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return TimeSeriesPanel(data.T, labels, dt)


def save_panel_binary(panel: TimeSeriesPanel, path: str | Path) -> None:
    """Compact format: magic, shape, dt, JSON label blob, little-endian
    float64 samples row-major (one row per channel)."""
    blob = json.dumps(list(panel.labels)).encode()
    with Path(path).open("wb") as fh:
        fh.write(PANEL_MAGIC)
        fh.write(struct.pack("<QQdI", panel.n_channels, panel.n_samples, panel.dt, len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(panel.data, dtype="<f8").tobytes())


def load_panel_binary(path: str | Path) -> TimeSeriesPanel:
    with Path(path).open("rb") as fh:
        magic = fh.read(4)
        if magic != PANEL_MAGIC:
            raise DataError(f"{path}: not a panel file (bad magic {magic!r})")
        n, t, dt, blob_len = struct.unpack("<QQdI", fh.read(28))
        labels = json.loads(fh.read(blob_len).decode())
        data = np.frombuffer(fh.read(n * t * 8), dtype="<f8").reshape(n, t)
    return TimeSeriesPanel(data.copy(), labels, dt)


def save_panel(panel: TimeSeriesPanel, path: str | Path, fmt: str = "bin") -> Path:
    path = Path(path)
    if fmt == "csv":
        save_panel_csv(panel, path)
    elif fmt == "bin":
        save_panel_binary(panel, path)
    else:
        raise DataError(f"unknown panel format {fmt!r}")
    return path


def load_panel(path: str | Path) -> TimeSeriesPanel:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
    if magic == PANEL_MAGIC:
        return load_panel_binary(path)
    return load_panel_csv(path)


def select_channels(panel: TimeSeriesPanel, labels: Sequence[str]) -> TimeSeriesPanel:
    idx = [panel.index_of(lab) for lab in labels]
    return TimeSeriesPanel(panel.data[idx], [panel.labels[i] for i in idx], panel.dt)
