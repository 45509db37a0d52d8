"""Delimited output and figure rendering for CLI runs."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .characteristics import FlowSolution
from .driver import DriverRealization, brownian_path
from .solver import SolutionField

__all__ = [
    "ReportBundle",
    "write_field_csv",
    "write_trajectory_csv",
    "write_increments_csv",
    "write_events_csv",
    "plot_field",
    "plot_driver_path",
    "plot_convergence",
]


@dataclass
class ReportBundle:
    """Manifest of everything a CLI run wrote, plus per-check status."""

    out_dir: str
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def add(self, path: str) -> str:
        self.files.append(os.path.relpath(path, self.out_dir))
        return path

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def write_manifest(self) -> str:
        path = os.path.join(self.out_dir, "manifest.json")
        payload = {"files": self.files, "summary": self.summary,
                   "checks": self.checks, "passed": self.passed}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, default=str)
        self.files.append(os.path.relpath(path, self.out_dir))
        return path


def write_field_csv(fieldsol: SolutionField, path: str) -> None:
    """First row ``x,<t_0>,...``; one row per grid point; flagged points as nan."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [repr(float(t)) for t in fieldsol.times])
        for i, x in enumerate(fieldsol.grid):
            row = [repr(float(x))]
            for j in range(len(fieldsol.times)):
                v = fieldsol.values[j, i]
                row.append("nan" if fieldsol.flags[j, i] else repr(float(v)))
            w.writerow(row)
    flag_path = os.path.splitext(path)[0] + ".flags.csv"
    with open(flag_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [repr(float(t)) for t in fieldsol.times])
        for i, x in enumerate(fieldsol.grid):
            w.writerow([repr(float(x))] + [int(fieldsol.flags[j, i])
                                           for j in range(len(fieldsol.times))])


def write_trajectory_csv(flow: FlowSolution, point_index: int, path: str) -> None:
    """Per-time dump ``t,x_1..x_d,xi,zeta,E,I`` for one initial point (xi0=1, zeta0=0)."""
    d = flow.d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x_{j + 1}" for j in range(d)] + ["xi", "zeta", "E", "I"])
        for j, t in enumerate(flow.times):
            e = flow.E[point_index, j]
            i_acc = flow.I[point_index, j]
            row = [repr(float(t))]
            row += [repr(float(v)) for v in flow.x[point_index, j]]
            row += [repr(float(e)), repr(float(-i_acc)), repr(float(e)), repr(float(i_acc))]
            w.writerow(row)


def write_increments_csv(driver: DriverRealization, path: str) -> None:
    """Header ``t,dW_1..dW_m``; t is the left endpoint of each interval."""
    m = driver.m
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"dW_{j + 1}" for j in range(m)])
        for i in range(len(driver.grid) - 1):
            w.writerow([repr(float(driver.grid[i]))]
                       + [repr(float(v)) for v in driver.brownian_increments[i]])


def write_events_csv(driver: DriverRealization, path: str) -> None:
    m = driver.m
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time"] + [f"z_{j + 1}" for j in range(m)])
        for ev in driver.jump_events:
            w.writerow([repr(float(ev.time))] + [repr(float(v)) for v in ev.mark])


def plot_field(fieldsol: SolutionField, path: str, title: str = "solution field") -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for j, t in enumerate(fieldsol.times):
        vals = np.where(fieldsol.flags[j], np.nan, fieldsol.values[j])
        ax.plot(fieldsol.grid, vals, lw=1.0, label=f"t={t:g}")
    ax.set_xlabel("x")
    ax.set_ylabel("u(t, x)")
    ax.set_title(title)
    if len(fieldsol.times) <= 12:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_driver_path(driver: DriverRealization, path: str) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    w = brownian_path(driver)
    z = np.zeros(len(driver.grid))
    for ev in driver.jump_events:
        z[driver.grid >= ev.time - 1e-12] += float(ev.mark[0])
    if np.any(driver.brownian_increments):
        ax.step(driver.grid, w[:, 0], where="post", lw=0.8, label="W")
    if driver.jump_events or not np.any(driver.brownian_increments):
        ax.step(driver.grid, z, where="post", lw=0.8, label="jump part")
    ax.set_xlabel("t")
    ax.set_ylabel("path value")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_convergence(dts, errors, slope: float, r2: float, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(dts, errors, "o-", label="measured error")
    ref = errors[-1] * (np.asarray(dts) / dts[-1]) ** slope
    ax.loglog(dts, ref, "--", label=f"slope {slope:.2f} (R2={r2:.3f})")
    ax.set_xlabel("dt")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
