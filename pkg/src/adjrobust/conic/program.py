"""Solver-independent conic-program representation and a small builder.

The canonical form is

    min  c'x - sum_i w_i log(x_i)  + offset
    s.t. Aeq x = beq,
         x[slice_j] in K_j   for each cone block j,

with all remaining coordinates free.  Inequalities are lowered to
equalities with fresh orthant slack variables by the builder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..uncertainty import Cone


@dataclass(frozen=True)
class ConicProgram:
    n: int
    c: np.ndarray
    Aeq: sp.csr_matrix
    beq: np.ndarray
    cones: tuple  # of (start, Cone)
    log_weights: np.ndarray  # length n, >= 0, nonzero only on orthant coords
    offset: float = 0.0
    var_map: dict = field(default_factory=dict, compare=False)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        w = np.asarray(self.log_weights, dtype=float).ravel()
        beq = np.asarray(self.beq, dtype=float).ravel()
        if c.shape[0] != self.n or w.shape[0] != self.n:
            raise ValueError("objective size inconsistent with n")
        if self.Aeq.shape != (beq.shape[0], self.n):
            raise ValueError("Aeq shape inconsistent")
        if np.any(w < 0):
            raise ValueError("log weights must be nonnegative")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "log_weights", w)
        object.__setattr__(self, "beq", beq)
        # cone slices must be disjoint and in-range
        covered = np.zeros(self.n, dtype=bool)
        for start, cone in self.cones:
            if start < 0 or start + cone.dim > self.n:
                raise ValueError("cone slice out of range")
            if covered[start : start + cone.dim].any():
                raise ValueError("cone slices overlap")
            covered[start : start + cone.dim] = True
        if np.any(w[~covered] != 0):
            raise ValueError("log weights on free coordinates")

    @property
    def n_eq(self) -> int:
        return self.beq.shape[0]

    @property
    def requires_sdp(self) -> bool:
        return bool(self.metadata.get("requires_sdp", False))

    @property
    def has_log_objective(self) -> bool:
        return bool(np.any(self.log_weights > 0))

    def cone_kinds(self) -> frozenset:
        return frozenset(cone.kind for _, cone in self.cones)

    def objective_value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float).ravel()
        val = float(self.c @ x) + self.offset
        idx = np.nonzero(self.log_weights)[0]
        if idx.size:
            xi = x[idx]
            if np.any(xi <= 0):
                return float("inf")
            val -= float(self.log_weights[idx] @ np.log(xi))
        return val


class ProgramBuilder:
    """Incremental construction of a ConicProgram from named variable blocks."""

    def __init__(self):
        self._blocks: dict[str, tuple[int, int]] = {}  # name -> (start, dim)
        self._cones: list[tuple[int, Cone]] = []
        self._n = 0
        self._c: dict[str, np.ndarray] = {}
        self._logw: dict[str, np.ndarray] = {}
        self._eq_rows: list[tuple[dict, np.ndarray]] = []
        self._offset = 0.0
        self._slack_counter = 0
        self._metadata: dict = {}

    # -- variables ----------------------------------------------------------

    def _add_block(self, name: str, dim: int) -> str:
        if name in self._blocks:
            raise ValueError(f"duplicate block {name!r}")
        if dim < 1:
            raise ValueError("block dim must be >= 1")
        self._blocks[name] = (self._n, dim)
        self._n += dim
        return name

    def add_free(self, name: str, dim: int) -> str:
        return self._add_block(name, dim)

    def add_nonneg(self, name: str, dim: int) -> str:
        self._add_block(name, dim)
        self._cones.append((self._blocks[name][0], Cone("nonneg", dim)))
        return name

    def add_soc(self, name: str, dim: int) -> str:
        self._add_block(name, dim)
        self._cones.append((self._blocks[name][0], Cone("soc", dim)))
        return name

    def add_rsoc(self, name: str, dim: int) -> str:
        self._add_block(name, dim)
        self._cones.append((self._blocks[name][0], Cone("rsoc", dim)))
        return name

    def add_cone_slack(self, name: str, cones) -> str:
        """One block spanning a product of cones (used for G s + slack = g)."""
        cones = tuple(cones)
        dim = sum(c.dim for c in cones)
        self._add_block(name, dim)
        pos = self._blocks[name][0]
        for c in cones:
            self._cones.append((pos, c))
            pos += c.dim
        return name

    def add_mixed_slack(self, name: str, segments) -> str:
        """One block of interleaved cone and free segments.

        ``segments`` is an iterable of Cone instances and positive ints;
        an int adds that many free (unconstrained) coordinates.
        """
        segments = tuple(segments)
        dim = sum(s if isinstance(s, int) else s.dim for s in segments)
        self._add_block(name, dim)
        pos = self._blocks[name][0]
        for s in segments:
            if isinstance(s, int):
                pos += s
            else:
                self._cones.append((pos, s))
                pos += s.dim
        return name

    def dim(self, name: str) -> int:
        return self._blocks[name][1]

    def block_slice(self, name: str) -> slice:
        start, dim = self._blocks[name]
        return slice(start, start + dim)

    # -- constraints ---------------------------------------------------------

    @staticmethod
    def _coeff_matrix(coeff, rows: int, dim: int) -> sp.csr_matrix:
        if sp.issparse(coeff):
            M = coeff.tocsr()
        else:
            arr = np.asarray(coeff, dtype=float)
            if arr.ndim == 0:
                M = sp.identity(dim, format="csr") * float(arr)
            elif arr.ndim == 1:
                M = sp.csr_matrix(arr.reshape(1, -1))
            else:
                M = sp.csr_matrix(arr)
        if M.shape != (rows, dim):
            raise ValueError(f"coefficient shape {M.shape} != ({rows}, {dim})")
        return M

    def add_equality(self, coeffs: dict, rhs) -> None:
        """Rows  sum_name coeffs[name] @ x[name] = rhs."""
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float)).ravel()
        rows = rhs.shape[0]
        mats = {}
        for name, coeff in coeffs.items():
            _, dim = self._blocks[name]
            mats[name] = self._coeff_matrix(coeff, rows, dim)
        self._eq_rows.append((mats, rhs))

    def add_inequality(self, coeffs: dict, rhs) -> str:
        """Rows  sum coeffs[name] @ x[name] <= rhs, via an orthant slack."""
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float)).ravel()
        slack = self.add_nonneg(f"_slack{self._slack_counter}", rhs.shape[0])
        self._slack_counter += 1
        coeffs = dict(coeffs)
        coeffs[slack] = sp.identity(rhs.shape[0], format="csr")
        self.add_equality(coeffs, rhs)
        return slack

    # -- objective -----------------------------------------------------------

    def add_linear_objective(self, terms: dict) -> None:
        for name, vec in terms.items():
            _, dim = self._blocks[name]
            vec = np.asarray(vec, dtype=float).ravel()
            if vec.shape[0] != dim:
                raise ValueError(f"objective vector for {name!r} has wrong size")
            self._c[name] = self._c.get(name, np.zeros(dim)) + vec

    def set_linear_objective(self, terms: dict) -> None:
        self._c = {}
        self.add_linear_objective(terms)

    def add_log_objective(self, name: str, weights) -> None:
        """Subtract  sum_i weights_i * log(x[name]_i)  from the objective."""
        _, dim = self._blocks[name]
        weights = np.asarray(weights, dtype=float) * np.ones(dim)
        if np.any(weights < 0):
            raise ValueError("log weights must be nonnegative")
        self._logw[name] = self._logw.get(name, np.zeros(dim)) + weights

    def add_offset(self, val: float) -> None:
        self._offset += float(val)

    def set_metadata(self, **kwargs) -> None:
        self._metadata.update(kwargs)

    # -- assembly -------------------------------------------------------------

    def build(self) -> ConicProgram:
        n = self._n
        c = np.zeros(n)
        w = np.zeros(n)
        for name, vec in self._c.items():
            start, dim = self._blocks[name]
            c[start : start + dim] += vec
        for name, vec in self._logw.items():
            start, dim = self._blocks[name]
            w[start : start + dim] += vec

        data, row_idx, col_idx, rhs_parts = [], [], [], []
        row_base = 0
        for mats, rhs in self._eq_rows:
            for name, M in mats.items():
                start, _ = self._blocks[name]
                M = M.tocoo()
                data.append(M.data)
                row_idx.append(M.row + row_base)
                col_idx.append(M.col + start)
            rhs_parts.append(rhs)
            row_base += rhs.shape[0]
        if rhs_parts:
            Aeq = sp.coo_matrix(
                (
                    np.concatenate(data) if data else np.zeros(0),
                    (
                        np.concatenate(row_idx) if row_idx else np.zeros(0, dtype=int),
                        np.concatenate(col_idx) if col_idx else np.zeros(0, dtype=int),
                    ),
                ),
                shape=(row_base, n),
            ).tocsr()
            beq = np.concatenate(rhs_parts)
        else:
            Aeq = sp.csr_matrix((0, n))
            beq = np.zeros(0)

        var_map = {
            name: slice(start, start + dim)
            for name, (start, dim) in self._blocks.items()
        }
        return ConicProgram(
            n=n,
            c=c,
            Aeq=Aeq,
            beq=beq,
            cones=tuple(self._cones),
            log_weights=w,
            offset=self._offset,
            var_map=var_map,
            metadata=dict(self._metadata),
        )
