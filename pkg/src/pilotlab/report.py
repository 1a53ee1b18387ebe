"""Structured run outputs: JSON summaries, delimited profiles, matplotlib
figures rendered to files, and a digest manifest.

Summaries contain only deterministic content (values, config echo, seed);
wall time and file digests live in the manifest so summaries stay
byte-identical across reruns of the same (config, seed).
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = ["RunWriter"]

_PACKAGE_VERSION = "0.1.0"


def _atomic_write(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


class RunWriter:
    """Collects output files for one run directory and writes the manifest."""

    def __init__(self, out_dir: str, config_hash: str, seed: int):
        self.out_dir = out_dir
        self.config_hash = config_hash
        self.seed = seed
        self._t0 = time.monotonic()
        self._files: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_json(self, name: str, payload: dict) -> str:
        body = dict(payload)
        body.setdefault("config_hash", self.config_hash)
        body.setdefault("seed", self.seed)
        text = json.dumps(body, indent=2, sort_keys=True, default=_json_default)
        _atomic_write(self.path(name), (text + "\n").encode("utf-8"))
        self._files.append(name)
        return self.path(name)

    def write_csv(self, name: str, header: list[str], rows) -> str:
        buf = []
        out = csv.writer(_ListIO(buf))
        out.writerow(header)
        for row in rows:
            out.writerow([_csv_cell(v) for v in row])
        _atomic_write(self.path(name), "".join(buf).encode("utf-8"))
        self._files.append(name)
        return self.path(name)

    def save_figure(self, name: str, fig) -> str:
        tmp = self.path(name + ".tmp")
        fig.savefig(tmp, dpi=150, bbox_inches="tight",
                    format=os.path.splitext(name)[1].lstrip("."))
        plt.close(fig)
        os.replace(tmp, self.path(name))
        self._files.append(name)
        return self.path(name)

    def finalize(self, extras: dict | None = None) -> str:
        entries = []
        for name in sorted(set(self._files)):
            full = self.path(name)
            digest = hashlib.sha256(open(full, "rb").read()).hexdigest()
            entries.append({"name": name, "sha256": digest,
                            "bytes": os.path.getsize(full)})
        manifest = {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "package_version": _PACKAGE_VERSION,
            "wall_time_s": round(time.monotonic() - self._t0, 3),
            "outputs": entries,
        }
        if extras:
            manifest.update(extras)
        text = json.dumps(manifest, indent=2, sort_keys=True)
        _atomic_write(self.path("manifest.json"), (text + "\n").encode("utf-8"))
        return self.path("manifest.json")


class _ListIO:
    def __init__(self, sink):
        self._sink = sink

    def write(self, text):
        self._sink.append(text)


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


# --- figure builders -------------------------------------------------------


def profile_figure(x, curves: dict[str, np.ndarray], title: str,
                   xlabel: str = "x", ylabel: str = "intensity",
                   marks: np.ndarray | None = None):
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, y in curves.items():
        ax.plot(x, y, lw=1.2, label=label)
    if marks is not None:
        for m in marks:
            ax.axvline(m, color="0.6", lw=0.6, ls="--")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(curves) > 1:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return fig


def trajectory_figure(times, positions, title: str, max_shown: int = 300,
                      background=None):
    fig, ax = plt.subplots(figsize=(7, 5))
    if background is not None:
        bg_t, bg_x, bg_rho = background
        ax.pcolormesh(bg_x, bg_t, bg_rho, cmap="magma", shading="auto",
                      rasterized=True)
    count = positions.shape[1]
    stride = max(1, count // max_shown)
    ax.plot(positions[:, ::stride], times, lw=0.3, color="cyan", alpha=0.5)
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title(title)
    return fig


def series_figure(x, ys: dict[str, np.ndarray], title: str,
                  xlabel: str, ylabel: str, logy: bool = False):
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in ys.items():
        ax.plot(x, y, marker="o", ms=3, lw=1.0, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(ys) > 1:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return fig
