"""surpeval: surprisal engines, mixed-model regressions, and scaling meta-analyses.

The package is organized as five subsystems:

- ``surpeval.engines``: three small autoregressive language-model families
  (transformer, rwkv, mamba) behind one next-token log-probability
  interface, plus tokenization and word-level surprisal aggregation.
- ``surpeval.corpus``: dataset recipes, trial-table loading, exclusion
  filtering, context construction, and response transforms.
- ``surpeval.lmm``: linear mixed-effects estimation via profiled REML/ML
  deviance, AIC, and ordinary least squares.
- ``surpeval.metastats``: per-dataset OLS meta-regressions of AIC on
  architecture and scale/perplexity, with FDR correction.
- ``surpeval.cli``: the ``surpeval`` command-line pipeline producing CSV
  tables and SVG figures.
"""

__version__ = "0.1.0"
