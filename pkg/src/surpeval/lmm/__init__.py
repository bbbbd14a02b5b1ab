"""Linear mixed-effects estimation, AIC, and ordinary least squares."""

from .design import (DesignError, DesignMatrices, FixedSpec, RandomTerm,
                     TermBlock, build_design)
from .fit import (BOUNDARY_TOL, FitError, LmmFit, aic, fit_lmm, fit_report,
                  gls_solution, profiled_deviance)
from .ols import OlsError, OlsFit, fit_ols, t_pvalue
