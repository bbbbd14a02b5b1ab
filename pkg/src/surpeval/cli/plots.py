"""Static SVG figures: per-dataset AIC against scale or perplexity.

One figure per (metric group, analysis mode): the N400 datasets in one
grid, the reading-time datasets in another, one panel per dataset, one
polyline per architecture. Styling comes from the checked-in style
file, and SVG metadata is pinned so reruns are byte-identical.
"""

import math
import warnings
from importlib import resources

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt    # noqa: E402 - backend must be set first

from ..textio import read_csv
from .config import RunConfig
from .stages import StageResult, StageError, model_metas

ARCH_COLORS = {"pythia": "#4477aa", "mamba": "#ee6677", "rwkv": "#228833"}
ARCH_ORDER = ("pythia", "rwkv", "mamba")

X_LABELS = {"scale": "ln(parameters)", "perplexity": "-ln(perplexity)"}


def _style_path():
    return str(resources.files("surpeval.cli") / "figures.mplstyle")


def _save_svg(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _empty_figure(path, title):
    with plt.style.context(_style_path()):
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.set_axis_off()
        ax.text(0.5, 0.5, f"no datasets ({title})", ha="center", va="center")
        _save_svg(fig, path)


def stage_plot(cfg: RunConfig) -> StageResult:
    aic_path = cfg.out_dir / "aic.csv"
    if not aic_path.exists():
        raise StageError("aic.csv not found; run the fit stage first")
    aic_rows = read_csv(aic_path)
    arch_of = {e.name: e.meta_architecture for e in cfg.engines}
    groups = {"n400": [], "reading_time": []}
    for ds in cfg.datasets:
        key = "n400" if ds.recipe.metric == "N400" else "reading_time"
        groups[key].append(ds.recipe.dataset_id)

    fig_dir = cfg.out_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    result = StageResult()
    for mode in cfg.analysis_modes:
        metas = {m.name: m for m in
                 model_metas(cfg, with_perplexity=(mode == "perplexity"))}
        xval = {name: (m.scale if mode == "scale" else m.neg_log_ppl)
                for name, m in metas.items()}
        for group, datasets in groups.items():
            path = fig_dir / f"{group}_{mode}.svg"
            if not datasets:
                warnings.warn(f"no datasets for figure {path.name}")
                _empty_figure(path, f"{group}, {mode}")
                result.files.append(path)
                continue
            ncols = min(3, len(datasets))
            nrows = math.ceil(len(datasets) / ncols)
            with plt.style.context(_style_path()):
                fig, axes = plt.subplots(
                    nrows, ncols, squeeze=False,
                    figsize=(3.2 * ncols, 2.6 * nrows))
                for pi, dataset_id in enumerate(datasets):
                    ax = axes[pi // ncols][pi % ncols]
                    points = [(xval[r["engine"]], float(r["aic"]),
                               arch_of[r["engine"]])
                              for r in aic_rows if r["dataset"] == dataset_id
                              and r["engine"] in arch_of]
                    for arch in ARCH_ORDER:
                        series = sorted((x, y) for x, y, a in points if a == arch)
                        if series:
                            ax.plot([s[0] for s in series], [s[1] for s in series],
                                    marker="o", color=ARCH_COLORS[arch],
                                    label=arch)
                    ax.set_title(dataset_id)
                    ax.set_xlabel(X_LABELS[mode])
                    ax.set_ylabel("AIC")
                for pi in range(len(datasets), nrows * ncols):
                    axes[pi // ncols][pi % ncols].set_axis_off()
                handles, labels = axes[0][0].get_legend_handles_labels()
                if handles:
                    fig.legend(handles, labels, loc="lower right", ncol=3)
                fig.tight_layout()
                _save_svg(fig, path)
            result.files.append(path)
    return result
