"""Static SVG figures of the command outputs."""
from __future__ import annotations

from typing import Dict, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from bathy.geometry import ScalarField  # noqa: E402
from bathy.schemas import TermBreakdown  # noqa: E402

TERM_NAMES = ("g2", "g3", "tbot", "tlog1", "lhs_energy", "lemma31_rhs", "j1", "j2", "j3")


def profiles_figure(fields: Dict[str, ScalarField], title: str = ""):
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, field in fields.items():
        ax.plot(field.grid.nodes, field.values, label=label)
    ax.set_xlabel("X")
    ax.set_title(title)
    ax.legend(loc="best")
    fig.tight_layout()
    return fig


def term_bars_figure(terms: TermBreakdown, title: str = "term magnitudes"):
    values = [getattr(terms, name) for name in TERM_NAMES]
    magnitudes = [abs(v) if v is not None else 0.0 for v in values]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(TERM_NAMES, np.maximum(magnitudes, 1e-300))
    ax.set_yscale("log")
    ax.set_title(title)
    ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    return fig


def convergence_figure(history: Sequence[float], title: str = "misfit"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(np.arange(len(history)), np.maximum(np.asarray(history, dtype=float), 1e-300), marker=".")
    ax.set_xlabel("iteration")
    ax.set_ylabel("misfit")
    ax.set_title(title)
    fig.tight_layout()
    return fig


def sweep_figure(eps: Sequence[float], l1: Sequence[float], rhs: Sequence[float]):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(eps, np.maximum(rhs, 1e-300), marker="o", label="RHS")
    ax.loglog(eps, np.maximum(l1, 1e-300), marker="s", label="L1 distance")
    ax.set_xlabel("epsilon")
    ax.legend(loc="best")
    fig.tight_layout()
    return fig


def close(fig) -> None:
    plt.close(fig)
