"""Fixed- and random-effects design matrices for mixed-model fitting.

Data enter as a plain mapping of column name to sequence. Each random
term contributes one intercept column plus one column per slope for
every level of its grouping factor; levels are ordered lexicographically
so the design is invariant to row order. The relative covariance factor
of a term is a lower-triangular k x k template (full if correlated,
diagonal otherwise) repeated over levels.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class FixedSpec:
    names: tuple[str, ...]
    intercept: bool = True

    def column_names(self) -> tuple[str, ...]:
        return (("(Intercept)",) if self.intercept else ()) + tuple(self.names)


@dataclass(frozen=True)
class RandomTerm:
    """Random intercept plus optional slopes for one grouping factor."""

    group: str
    slopes: tuple[str, ...] = ()
    correlated: bool = True

    @property
    def k(self) -> int:
        return 1 + len(self.slopes)

    @property
    def n_theta(self) -> int:
        return self.k * (self.k + 1) // 2 if self.correlated else self.k

    def describe(self) -> str:
        cols = " + ".join(("intercept",) + self.slopes)
        corr = "correlated" if self.correlated else "uncorrelated"
        return f"({cols} | {self.group}, {corr})"


@dataclass
class TermBlock:
    term: RandomTerm
    levels: list[str]
    z_offset: int                       # first Z column of this term
    theta_slice: slice

    @property
    def n_columns(self) -> int:
        return len(self.levels) * self.term.k


@dataclass
class DesignMatrices:
    X: np.ndarray                       # (n, p) dense
    Z: sparse.csc_matrix                # (n, q)
    x_names: tuple[str, ...]
    blocks: list[TermBlock]
    dropped: tuple[str, ...] = ()
    theta_names: tuple[str, ...] = ()
    theta_lower: np.ndarray = field(default_factory=lambda: np.empty(0))
    theta_start: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Z.shape[1]

    @property
    def n_theta(self) -> int:
        return len(self.theta_lower)

    def lambda_indices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rows, cols, theta index) triplets of the relative covariance factor.

        Computed once per design; the factor at any theta is then a single
        gather-and-scatter into a q x q matrix.
        """
        rows, cols, params = [], [], []
        for block in self.blocks:
            k = block.term.k
            if block.term.correlated:
                r_idx, c_idx = np.tril_indices(k)
            else:
                r_idx = c_idx = np.arange(k)
            p_idx = np.arange(block.theta_slice.start, block.theta_slice.stop)
            for lvl in range(len(block.levels)):
                base = block.z_offset + lvl * k
                rows.append(base + r_idx)
                cols.append(base + c_idx)
                params.append(p_idx)
        if not rows:
            empty = np.empty(0, dtype=int)
            return empty, empty, empty
        return (np.concatenate(rows), np.concatenate(cols),
                np.concatenate(params))

    def lambda_dense(self, theta, indices=None) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_theta,):
            raise DesignError(f"theta must have length {self.n_theta}")
        rows, cols, params = indices if indices is not None else self.lambda_indices()
        lam = np.zeros((self.q, self.q))
        lam[rows, cols] = theta[params]
        return lam

    def lambda_matrix(self, theta) -> sparse.csc_matrix:
        """Block-diagonal relative covariance factor at the given theta."""
        return sparse.csc_matrix(self.lambda_dense(theta))


def _numeric_column(data, name, n) -> np.ndarray:
    if name not in data:
        raise DesignError(f"unresolved column name {name!r}")
    col = np.asarray(data[name], dtype=float)
    if col.shape != (n,):
        raise DesignError(f"column {name!r} has wrong length")
    if not np.all(np.isfinite(col)):
        raise DesignError(f"column {name!r} contains non-finite values")
    return col


def build_design(data, fixed: FixedSpec, random) -> DesignMatrices:
    """Assemble X and sparse Z from named columns.

    Aliased fixed-effect columns (linearly dependent on earlier ones) are
    dropped with a warning rather than an error.
    """
    if not data:
        raise DesignError("no data columns")
    n = len(next(iter(data.values())))

    columns = []
    names = []
    if fixed.intercept:
        columns.append(np.ones(n))
        names.append("(Intercept)")
    for name in fixed.names:
        columns.append(_numeric_column(data, name, n))
        names.append(name)
    X = np.column_stack(columns) if columns else np.empty((n, 0))

    # drop aliased columns, keeping the earliest-listed spanning set
    dropped: list[str] = []
    if X.shape[1] > 0 and np.linalg.matrix_rank(X) < X.shape[1]:
        keep: list[int] = []
        rank = 0
        for j in range(X.shape[1]):
            candidate = np.linalg.matrix_rank(X[:, keep + [j]])
            if candidate > rank:
                keep.append(j)
                rank = candidate
            else:
                dropped.append(names[j])
        warnings.warn(
            f"dropping aliased fixed-effect columns: {', '.join(dropped)}")
        X = X[:, keep]
        names = [names[j] for j in keep]

    blocks: list[TermBlock] = []
    z_rows: list[int] = []
    z_cols = []
    z_vals = []
    theta_names: list[str] = []
    theta_lower: list[float] = []
    theta_start: list[float] = []
    z_offset = 0
    for term in random:
        if term.group not in data:
            raise DesignError(f"unresolved grouping factor {term.group!r}")
        raw = [str(v) for v in data[term.group]]
        if len(raw) != n:
            raise DesignError(f"grouping factor {term.group!r} has wrong length")
        levels = sorted(set(raw))
        if len(levels) < 2:
            raise DesignError(
                f"grouping factor {term.group!r} has fewer than 2 levels")
        index = {lvl: i for i, lvl in enumerate(levels)}
        codes = np.array([index[v] for v in raw])
        slope_cols = [_numeric_column(data, s, n) for s in term.slopes]
        k = term.k
        for j in range(k):
            vals = np.ones(n) if j == 0 else slope_cols[j - 1]
            z_rows.extend(range(n))
            z_cols.append(z_offset + codes * k + j)
            z_vals.append(vals)
        t0 = len(theta_lower)
        labels = ("intercept",) + term.slopes
        if term.correlated:
            for r, c in zip(*np.tril_indices(k)):
                theta_names.append(f"{term.group}:chol[{labels[r]},{labels[c]}]")
                theta_lower.append(0.0 if r == c else -np.inf)
                theta_start.append(1.0 if r == c else 0.0)
        else:
            for r in range(k):
                theta_names.append(f"{term.group}:sd[{labels[r]}]")
                theta_lower.append(0.0)
                theta_start.append(1.0)
        blocks.append(TermBlock(term, levels, z_offset, slice(t0, len(theta_lower))))
        z_offset += len(levels) * k

    Z = sparse.csc_matrix(
        (np.concatenate(z_vals) if z_vals else np.empty(0),
         (np.array(z_rows, dtype=int),
          np.concatenate(z_cols) if z_cols else np.empty(0, dtype=int))),
        shape=(n, z_offset))
    return DesignMatrices(
        X=X, Z=Z, x_names=tuple(names), blocks=blocks, dropped=tuple(dropped),
        theta_names=tuple(theta_names),
        theta_lower=np.array(theta_lower),
        theta_start=np.array(theta_start),
    )
