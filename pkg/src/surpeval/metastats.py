"""Meta-analysis: per-dataset OLS of AIC on architecture and scale/perplexity.

Every variable, the AIC response included, is z-scored before the
regression, and the two architecture indicators are coded relative to
the pythia (transformer) reference. With the canonical 14-model roster
each regression has 10 residual degrees of freedom. A negative scale
estimate means larger models fit the human metric better; perplexity
enters as negative log-perplexity so the sign convention carries over.

False-discovery-rate adjustment runs after all per-dataset regressions
are assembled; the family is configurable (one family per analysis
table by default, or per dataset), as is the step-up variant (BH, or BY
with the harmonic-sum factor).
"""

import math
from dataclasses import dataclass

import numpy as np

from .lmm.ols import fit_ols, t_pvalue

ARCHITECTURES = ("pythia", "rwkv", "mamba")
FDR_METHODS = ("BH", "BY")
FDR_FAMILIES = ("table", "dataset")


class MetaError(ValueError):
    pass


@dataclass(frozen=True)
class ModelMeta:
    name: str
    architecture: str
    param_count: int
    neg_log_ppl: float | None = None

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise MetaError(f"unknown architecture {self.architecture!r}")
        if self.param_count <= 0:
            raise MetaError("param_count must be positive")

    @property
    def scale(self) -> float:
        return math.log(self.param_count)


# the published 14-model roster: four RWKV, five Pythia, five Mamba sizes
CANONICAL_ROSTER: tuple[ModelMeta, ...] = (
    ModelMeta("rwkv-169m", "rwkv", 169_342_464),
    ModelMeta("rwkv-430m", "rwkv", 430_397_440),
    ModelMeta("rwkv-1.5b", "rwkv", 1_515_106_304),
    ModelMeta("rwkv-3b", "rwkv", 2_984_627_200),
    ModelMeta("pythia-160m", "pythia", 162_322_944),
    ModelMeta("pythia-410m", "pythia", 405_334_016),
    ModelMeta("pythia-1b", "pythia", 1_011_781_632),
    ModelMeta("pythia-1.4b", "pythia", 1_414_647_808),
    ModelMeta("pythia-2.8b", "pythia", 2_775_208_960),
    ModelMeta("mamba-130m", "mamba", 129_135_360),
    ModelMeta("mamba-370m", "mamba", 371_516_416),
    ModelMeta("mamba-790m", "mamba", 793_204_224),
    ModelMeta("mamba-1.4b", "mamba", 1_372_178_432),
    ModelMeta("mamba-2.8b", "mamba", 2_768_345_600),
)


@dataclass(frozen=True)
class AicObservation:
    dataset_id: str
    model: str
    aic: float


@dataclass
class MetaResultRow:
    dataset_id: str
    predictor: str
    estimate: float
    se: float
    t: float
    df: int
    p_uncorrected: float
    p_adjusted: float
    perfect_fit: bool = False


def zscore(values) -> np.ndarray:
    """Center to mean 0 and rescale to sample (ddof=1) standard deviation 1."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise MetaError("zscore needs a 1-d vector of length >= 2")
    sd = x.std(ddof=1)
    if sd == 0:
        raise MetaError("cannot z-score a constant column")
    return (x - x.mean()) / sd


def encode_architecture(metas, reference="pythia") -> tuple[np.ndarray, np.ndarray]:
    """(mamba, rwkv) indicator columns relative to the reference family."""
    if reference != "pythia":
        raise MetaError("only the pythia reference coding is supported")
    for m in metas:
        if m.architecture not in ARCHITECTURES:
            raise MetaError(f"unknown architecture {m.architecture!r}")
    mamba = np.array([1.0 if m.architecture == "mamba" else 0.0 for m in metas])
    rwkv = np.array([1.0 if m.architecture == "rwkv" else 0.0 for m in metas])
    return mamba, rwkv


def fdr_adjust(pvals, method="BH") -> np.ndarray:
    """Step-up adjusted p-values, clipped to 1 and monotone in sorted order."""
    p = np.asarray(pvals, dtype=float)
    if p.ndim != 1:
        raise MetaError("fdr_adjust expects a 1-d vector")
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise MetaError("p-values must lie in [0, 1]")
    if method not in FDR_METHODS:
        raise MetaError(f"unknown FDR method {method!r}")
    m = len(p)
    if m == 0:
        return p.copy()
    factor = np.sum(1.0 / np.arange(1, m + 1)) if method == "BY" else 1.0
    order = np.argsort(p, kind="stable")
    ranked = p[order] * factor * m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adjusted, 1.0)
    return out


def meta_regression(observations, metas, mode="scale", fdr_method="BH",
                    fdr_family="table") -> list[MetaResultRow]:
    """One z-scored OLS per dataset; FDR applied over the configured family."""
    if mode not in ("scale", "perplexity"):
        raise MetaError(f"unknown mode {mode!r}")
    if fdr_family not in FDR_FAMILIES:
        raise MetaError(f"unknown FDR family {fdr_family!r}")
    metas = list(metas)
    names = [m.name for m in metas]
    if len(set(names)) != len(names):
        raise MetaError("duplicate model names in roster")
    if len(metas) < 6:
        raise MetaError("need at least 6 models in the roster")
    if mode == "perplexity":
        missing = [m.name for m in metas if m.neg_log_ppl is None]
        if missing:
            raise MetaError(f"no perplexity for model(s): {', '.join(missing)}")
        x_extra = np.array([m.neg_log_ppl for m in metas])
        x_name = "Perplexity"
    else:
        x_extra = np.array([m.scale for m in metas])
        x_name = "Scale"
    mamba, rwkv = encode_architecture(metas)

    by_dataset: dict[str, dict[str, float]] = {}
    for obs in observations:
        slot = by_dataset.setdefault(obs.dataset_id, {})
        if obs.model in slot:
            raise MetaError(
                f"duplicate AIC observation for ({obs.dataset_id}, {obs.model})")
        slot[obs.model] = obs.aic

    rows: list[MetaResultRow] = []
    for dataset_id in sorted(by_dataset):
        have = by_dataset[dataset_id]
        missing = [n for n in names if n not in have]
        extra = [n for n in have if n not in names]
        if missing or extra:
            raise MetaError(
                f"dataset {dataset_id}: roster mismatch "
                f"(missing: {missing or 'none'}, unexpected: {extra or 'none'})")
        y = zscore([have[n] for n in names])
        X = np.column_stack([np.ones(len(metas)), zscore(mamba), zscore(rwkv),
                             zscore(x_extra)])
        fit = fit_ols(X, y, names=("Intercept", "Mamba", "RWKV", x_name))
        for j, predictor in enumerate(fit.names):
            rows.append(MetaResultRow(
                dataset_id=dataset_id, predictor=predictor,
                estimate=float(fit.estimates[j]), se=float(fit.se[j]),
                t=float(fit.t[j]), df=fit.df,
                p_uncorrected=float(fit.p[j]), p_adjusted=float("nan"),
                perfect_fit=fit.perfect_fit))

    # FDR family barrier: adjust only after every regression contributed
    if fdr_family == "table":
        groups = [list(range(len(rows)))]
    else:
        groups = {}
        for i, row in enumerate(rows):
            groups.setdefault(row.dataset_id, []).append(i)
        groups = list(groups.values())
    for idx in groups:
        adjusted = fdr_adjust([rows[i].p_uncorrected for i in idx], fdr_method)
        for i, adj in zip(idx, adjusted):
            rows[i].p_adjusted = float(adj)
    return rows
