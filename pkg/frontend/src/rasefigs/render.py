"""Render publication-style figures from the CSV/JSON results the raselab CLI emits.

The renderer performs no physics: it consumes only the documented column
schemas and draws. Output is SVG with a fixed hash salt and no embedded date,
so re-rendering the same inputs is byte-idempotent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "rasefigs"

import matplotlib.pyplot as plt
import numpy as np

FIGURE_IDS = ("fig3", "fig4", "fig5", "fig6", "fig7", "fig9", "fig10")

# expected CSV column schema per figure, keyed by input file suffix
SCHEMAS = {
    "fig3": {"fig3_overlay.csv": ["t_us", "ase_i", "ase_q", "rase_t_i", "rase_t_q"]},
    "fig4": {"fig4_decay.csv": ["delay_us", "amplitude", "model"]},
    "fig5": {"fig5_decay.csv": ["delay_us", "amplitude", "model"]},
    "fig6": {"fig6_efficiency.csv": ["gain_db", "eff_mbe", "eff_ledingham"]},
    "fig7": {"fig7_correlations.csv": ["lag_us", "auto_A", "auto_R", "cross",
                                       "auto_A_clean", "expected_cross"]},
    "fig9": {"fig9_modes.csv": ["mode", "delay_us", "auto_A", "cross",
                                "neighbor_cross"]},
    "fig10": {"fig10_inseparability.csv": ["b", "lambda", "lambda_model"]},
}


class SchemaError(ValueError):
    """Input file missing or its columns do not match the documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    input_dir: Path
    style: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.figure_id not in FIGURE_IDS:
            raise SchemaError(
                f"unknown figure {self.figure_id!r}; choose from {FIGURE_IDS}")
        object.__setattr__(self, "input_dir", Path(self.input_dir))


def _load_csv(path: Path, expected: list[str]) -> dict[str, np.ndarray]:
    if not path.exists():
        raise SchemaError(f"missing input {path}")
    header = path.read_text().splitlines()
    if not header:
        raise SchemaError(f"{path} is empty")
    found = [c.strip() for c in header[0].split(",")]
    if found != expected:
        raise SchemaError(
            f"{path.name}: expected columns {expected}, found {found}")
    if len([line for line in header[1:] if line.strip()]) == 0:
        raise SchemaError(f"{path.name} has a header but no data rows")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(found)}


def _load_results(spec: FigureSpec) -> dict:
    path = spec.input_dir / f"{spec.figure_id}_results.json"
    if not path.exists():
        return {}
    return json.loads(path.read_text()).get("results", {})


def _inputs(spec: FigureSpec) -> dict[str, dict[str, np.ndarray]]:
    out = {}
    for name, columns in SCHEMAS[spec.figure_id].items():
        out[name] = _load_csv(spec.input_dir / name, columns)
    return out


def _draw_fig3(ax, data, results):
    d = data["fig3_overlay.csv"]
    ax.plot(d["t_us"], d["ase_i"], lw=0.8, label="ASE (in-phase)")
    ax.plot(d["t_us"], d["rase_t_i"], lw=0.8, label="RASE, transformed")
    offset = 1.1 * max(np.max(np.abs(d["ase_q"])), 1e-12) * 3
    ax.plot(d["t_us"], d["ase_q"] - offset, lw=0.8, ls="--",
            label="ASE (out-of-phase)")
    ax.plot(d["t_us"], d["rase_t_q"] - offset, lw=0.8, ls="--",
            label="RASE, transformed")
    ax.set_xlabel("time in window (us)")
    ax.set_ylabel("quadrature amplitude")
    if "overlay_inphase_correlation" in results:
        ax.set_title(f"overlay correlation "
                     f"{results['overlay_inphase_correlation']:.3f}")


def _draw_decay(ax, d, results, xlabel):
    ax.semilogy(d["delay_us"], d["amplitude"], "o", ms=3, label="echo amplitude")
    ax.semilogy(d["delay_us"], d["model"], "-", label="fit")
    if "t_1e_us" in results:
        ax.axvline(results["t_1e_us"], color="gray", lw=0.8, ls=":",
                   label=f"1/e at {results['t_1e_us']:.1f} us")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("echo amplitude")


def _draw_fig6(ax, data, results):
    d = data["fig6_efficiency.csv"]
    ax.plot(d["gain_db"], d["eff_mbe"], "o-", ms=4, label="MBE model")
    ax.plot(d["gain_db"], d["eff_ledingham"], "--", label="ideal (Ledingham)")
    ax.set_xlabel("gain (dB)")
    ax.set_ylabel("recall efficiency")
    ax.set_ylim(0, 1.05)


def _draw_fig7(ax, data, results):
    d = data["fig7_correlations.csv"]
    ax.plot(d["lag_us"], d["auto_A"], lw=0.9, label="ASE auto")
    ax.plot(d["lag_us"], d["auto_R"], lw=0.9, label="RASE auto")
    ax.plot(d["lag_us"], d["cross"], lw=0.9, label="cross")
    ax.plot(d["lag_us"], d["expected_cross"], "r--", lw=0.9,
            label="expected cross")
    ax.set_xlabel("lag (us)")
    ax.set_ylabel("|correlation|")


def _draw_fig9(ax, data, results):
    d = data["fig9_modes.csv"]
    ax.semilogy(d["mode"], d["auto_A"], ".-", ms=3, lw=0.7, label="ASE auto")
    ax.semilogy(d["mode"], d["cross"], ".-", ms=3, lw=0.7, label="cross")
    nb = d["neighbor_cross"]
    good = ~np.isnan(nb)
    ax.semilogy(d["mode"][good], nb[good], ".-", ms=3, lw=0.7,
                label="neighbor cross")
    ax.axhline(d["cross"][0] / np.e, color="k", ls="--", lw=0.8,
               label="1/e of mode 1")
    ax.set_xlabel("mode index")
    ax.set_ylabel("correlation amplitude")


def _draw_fig10(ax, data, results):
    d = data["fig10_inseparability.csv"]
    lam = d["lambda"]
    sigma = float(results.get("sigma", 0.0))
    if sigma > 0:
        ax.fill_between(d["b"], lam - 2 * sigma, lam + 2 * sigma,
                        color="C0", alpha=0.15, lw=0, label="2 sigma")
        ax.fill_between(d["b"], lam - sigma, lam + sigma,
                        color="C0", alpha=0.3, lw=0, label="1 sigma")
    ax.plot(d["b"], lam, lw=1.0, label="lambda(b)")
    ax.plot(d["b"], d["lambda_model"], "r-.", lw=1.0, label="model")
    ax.axhline(2.0, color="k", lw=0.8, label="classical bound")
    ax.set_xlabel("b")
    ax.set_ylabel("lambda")


_DRAWERS = {
    "fig3": _draw_fig3,
    "fig4": lambda ax, data, res: _draw_decay(
        ax, data["fig4_decay.csv"], res, "delay 2 t_a + t_b (us)"),
    "fig5": lambda ax, data, res: _draw_decay(
        ax, data["fig5_decay.csv"], res, "storage time t_b (us)"),
    "fig6": _draw_fig6,
    "fig7": _draw_fig7,
    "fig9": _draw_fig9,
    "fig10": _draw_fig10,
}


def render(spec: FigureSpec, out_dir: str | Path) -> Path:
    """Render one figure to SVG; returns the written path.

    Raises :class:`SchemaError` (and writes nothing) when an input is missing,
    empty, or its columns differ from the documented schema.
    """
    data = _inputs(spec)  # validate everything before any output is created
    results = _load_results(spec)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=spec.style.get("figsize", (5.2, 3.4)))
    try:
        _DRAWERS[spec.figure_id](ax, data, results)
        ax.legend(fontsize=7, frameon=False)
        if spec.style.get("title"):
            ax.set_title(spec.style["title"])
        fig.tight_layout()
        out_path = out_dir / f"{spec.figure_id}.svg"
        fig.savefig(out_path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return out_path
