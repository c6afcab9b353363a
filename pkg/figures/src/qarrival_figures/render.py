"""Render one figure per CSV kind.

The renderer knows only the CSV schemas, never the simulation internals;
the header is validated before anything is plotted and a mismatch reports
the missing columns by name.  Figures use a fixed canvas and carry no
timestamps, so re-rendering the same CSV is stable.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SCHEMAS = {
    "trace": ["t", "density", "cumulative_p_d", "p_nd_running", "edge_leak"],
    "sweep": ["gamma", "p_d", "p_nd", "reflected_fraction", "penetrated_undetected"],
    "compare": ["gamma", "p_d", "p_nd", "p_restricted", "p_crossing",
                "interference_defect", "propagator_distance"],
    "povm": ["n", "gamma", "tau", "min_eig_omega", "min_eig_omega_bar",
             "completeness_residual", "nonprojector_witness", "trotter_steps",
             "trotter_error"],
    "two_detector": ["t", "numeric_survival", "analytic_survival", "abs_error"],
    "histogram": ["window_start", "window_end", "probability"],
}

FIGSIZE = (6.4, 4.0)
DPI = 110


class SchemaError(ValueError):
    """The CSV header does not carry the columns the figure kind needs."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    kind: str
    out_path: str
    title: str | None = None


def load_columns(csv_path: str, kind: str) -> dict[str, np.ndarray]:
    """Read the CSV into named columns after validating the header."""
    if kind not in SCHEMAS:
        raise SchemaError(f"unknown figure kind {kind!r}; choose one of "
                          + ", ".join(sorted(SCHEMAS)))
    expected = SCHEMAS[kind]
    with open(csv_path, "r", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise SchemaError(f"{csv_path} is empty")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in expected if c not in header]
    if missing:
        raise SchemaError(
            f"{csv_path} does not look like a {kind!r} file: missing column(s) "
            + ", ".join(missing)
        )
    idx = {c: header.index(c) for c in expected}
    data = {c: [] for c in expected}
    for row in rows[1:]:
        for c in expected:
            data[c].append(float(row[idx[c]]))
    return {c: np.asarray(v) for c, v in data.items()}


def _render_trace(ax, cols):
    ax.plot(cols["t"], cols["density"], color="tab:blue", label="arrival density")
    ax.set_xlabel("t")
    ax.set_ylabel("density", color="tab:blue")
    twin = ax.twinx()
    twin.fill_between(cols["t"], cols["cumulative_p_d"], color="tab:orange",
                      alpha=0.25, label="cumulative p_d")
    twin.plot(cols["t"], cols["cumulative_p_d"], color="tab:orange")
    twin.set_ylabel("cumulative p_d", color="tab:orange")
    twin.set_ylim(0.0, 1.05)
    return "arrival density and cumulative detection"


def _render_sweep(ax, cols):
    ax.semilogx(cols["gamma"], cols["p_d"], "o-", label="p_d")
    ax.semilogx(cols["gamma"], cols["p_nd"], "s--", label="p_nd")
    ax.semilogx(cols["gamma"], cols["reflected_fraction"], "^:",
                label="reflected fraction")
    ax.set_xlabel("gamma")
    ax.set_ylabel("probability")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    return "detection vs coupling strength"


def _render_compare(ax, cols):
    gammas = cols["gamma"]
    x = np.arange(len(gammas))
    width = 0.27
    ax.bar(x - width, cols["p_d"], width, label="p_d (detector)")
    ax.bar(x, cols["p_restricted"], width, label="p_restricted (paths)")
    ax.bar(x + width, cols["p_crossing"], width, label="p_crossing (paths)")
    ax.axhline(1.0, color="black", lw=0.8, ls=":")
    ax.set_xticks(x, [f"{g:g}" for g in gammas])
    ax.set_xlabel("gamma")
    ax.set_ylabel("probability")
    ax.legend()
    return "detector vs path-class probabilities"


def _render_povm(ax, cols):
    ax.loglog(cols["trotter_steps"], cols["trotter_error"], "o-",
              label="product-form error")
    ref = cols["trotter_error"][0] * cols["trotter_steps"][0] / cols["trotter_steps"]
    ax.loglog(cols["trotter_steps"], ref, ls=":", color="gray", label="1/steps")
    ax.set_xlabel("product-form steps")
    ax.set_ylabel("operator error")
    ax.legend()
    residual = cols["completeness_residual"][0]
    witness = cols["nonprojector_witness"][0]
    ax.text(0.02, 0.05,
            f"completeness residual {residual:.2e}\nnon-projector witness {witness:.2e}",
            transform=ax.transAxes, fontsize=8,
            bbox=dict(boxstyle="round", facecolor="white", alpha=0.8))
    return "operator pair audit"


def _render_two_detector(ax, cols):
    ax.semilogy(cols["t"], cols["analytic_survival"], "-", color="tab:orange",
                label="analytic")
    ax.semilogy(cols["t"], cols["numeric_survival"], "o", ms=3, color="tab:blue",
                label="numeric")
    ax.set_xlabel("t")
    ax.set_ylabel("survival probability")
    ax.legend()
    return "two-detector survival decay"


def _render_histogram(ax, cols):
    widths = cols["window_end"] - cols["window_start"]
    ax.bar(cols["window_start"], cols["probability"], width=widths, align="edge",
           edgecolor="black", linewidth=0.6)
    ax.set_xlabel("t")
    ax.set_ylabel("window probability")
    return "arrival-time histogram"


_RENDERERS = {
    "trace": _render_trace,
    "sweep": _render_sweep,
    "compare": _render_compare,
    "povm": _render_povm,
    "two_detector": _render_two_detector,
    "histogram": _render_histogram,
}


def render(spec: FigureSpec) -> str:
    """Render the figure described by spec; returns the output path."""
    cols = load_columns(spec.csv_path, spec.kind)
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    try:
        default_title = _RENDERERS[spec.kind](ax, cols)
        ax.set_title(spec.title if spec.title is not None else default_title)
        fig.tight_layout()
        fig.savefig(spec.out_path)
    finally:
        plt.close(fig)
    return spec.out_path
