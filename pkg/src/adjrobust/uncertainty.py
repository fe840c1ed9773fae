"""Primitive sets, shaping restrictions W = Y S + y, and set-size objectives.

Four concrete families are provided: p-norm balls (p in {1, 2, inf}),
ellipsoids, axis-aligned rectangles, and vertex-parameterized polytopes.
Each family pairs a primitive set {s : G s <=_K g} with a structure on the
admissible shaping parameters (Y, y) and a concave size objective.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

# positive-definiteness relaxation: Y > 0 is closed to Y >= EPS_PSD * I
EPS_PSD = 1e-9

_CONE_KINDS = ("nonneg", "soc", "rsoc")


@dataclass(frozen=True)
class Cone:
    """One cone block: nonnegative orthant, second-order, or rotated SOC.

    Conventions: soc is {(t, x) : t >= ||x||_2}; rsoc is
    {(u, v, z) : u, v >= 0, 2 u v >= ||z||_2^2}.  All three are self-dual.
    """

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in _CONE_KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("cone dim must be >= 1")
        if self.kind == "soc" and self.dim < 2:
            raise ValueError("second-order cone requires dim >= 2")
        if self.kind == "rsoc" and self.dim < 3:
            raise ValueError("rotated second-order cone requires dim >= 3")

    @property
    def dual(self) -> "Cone":
        return self  # orthant, SOC and RSOC are self-dual

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.dim:
            raise ValueError("dimension mismatch")
        if self.kind == "nonneg":
            return bool(np.all(x >= -tol))
        if self.kind == "soc":
            return bool(x[0] + tol >= np.linalg.norm(x[1:]))
        return bool(
            x[0] >= -tol
            and x[1] >= -tol
            and 2.0 * max(x[0], 0.0) * max(x[1], 0.0) + tol >= float(x[2:] @ x[2:])
        )

    def interior_point(self) -> np.ndarray:
        if self.kind == "nonneg":
            return np.ones(self.dim)
        e = np.zeros(self.dim)
        if self.kind == "soc":
            e[0] = 1.0
        else:
            e[0] = e[1] = 1.0
        return e


@dataclass(frozen=True)
class PrimitiveSet:
    """Compact convex set {s in R^n_s : G s <=_K g} with K a cone product."""

    G: np.ndarray
    g: np.ndarray
    cones: tuple
    extreme_points: np.ndarray | None = field(default=None, compare=False)
    # (i, j) orthant row pairs with row j = -(row i): an equality split in
    # two; duals may treat the pair as one free multiplier
    equality_pairs: tuple = ()

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        g = np.asarray(self.g, dtype=float).ravel()
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "cones", tuple(self.cones))
        object.__setattr__(self, "equality_pairs", tuple(self.equality_pairs))
        total = sum(c.dim for c in self.cones)
        if total != G.shape[0] or g.shape[0] != G.shape[0]:
            raise ValueError("cone dimensions must total the rows of (G, g)")
        for i, j in self.equality_pairs:
            if not (
                np.allclose(G[j], -G[i]) and np.isclose(g[j], -g[i])
            ):
                raise ValueError("equality pair rows must be exact negations")
        if self.extreme_points is not None:
            ep = np.atleast_2d(np.asarray(self.extreme_points, dtype=float))
            object.__setattr__(self, "extreme_points", ep)

    @property
    def n_s(self) -> int:
        return self.G.shape[1]

    @property
    def l(self) -> int:
        return self.G.shape[0]

    @property
    def is_polyhedral(self) -> bool:
        return all(c.kind == "nonneg" for c in self.cones)

    def contains(self, s, tol: float = 1e-9) -> bool:
        s = np.asarray(s, dtype=float).ravel()
        resid = self.g - self.G @ s
        pos = 0
        for c in self.cones:
            if not c.contains(resid[pos : pos + c.dim], tol=tol):
                return False
            pos += c.dim
        return True

    def coordinate_bounds(self) -> np.ndarray:
        """Bound each coordinate via 2*n_s conic programs; checks compactness.

        Returns an (n_s, 2) array of [min, max].  Raises if unbounded.
        """
        from .conic.program import ProgramBuilder
        from .conic.solver import solve

        bounds = np.zeros((self.n_s, 2))
        for i in range(self.n_s):
            for j, sign in enumerate((1.0, -1.0)):
                b = ProgramBuilder()
                s = b.add_free("s", self.n_s)
                slk = b.add_cone_slack("slack", self.cones)
                b.add_equality({"s": self.G, "slack": np.eye(self.l)}, self.g)
                obj = np.zeros(self.n_s)
                obj[i] = sign
                b.set_linear_objective({"s": obj})
                rep = solve(b.build())
                if rep.status != "optimal":
                    raise ValueError(
                        f"primitive set unbounded or empty along coordinate {i}"
                    )
                bounds[i, 0 if sign > 0 else 1] = sign * rep.objective
        return bounds


@dataclass(frozen=True)
class ShapingStructure:
    """Convex parameterization of the admissible shaping pairs (Y, y).

    families: scaled-identity (Y = r I, r >= 0), diagonal (Y = diag(gamma),
    gamma >= 0), symmetric-psd (Y = Y' >= EPS_PSD*I), free-columns-zero-offset
    (Y free, y = 0), free.  offsets: free, zero, box (-diag(Y) <= y <= diag(Y)).
    """

    family: str
    offset: str = "free"

    _FAMILIES = (
        "scaled-identity",
        "diagonal",
        "symmetric-psd",
        "free-columns-zero-offset",
        "free",
    )
    _OFFSETS = ("free", "zero", "box")

    def __post_init__(self):
        if self.family not in self._FAMILIES:
            raise ValueError(f"unknown shaping family {self.family!r}")
        if self.offset not in self._OFFSETS:
            raise ValueError(f"unknown offset mode {self.offset!r}")
        if self.family == "free-columns-zero-offset" and self.offset != "zero":
            raise ValueError("free-columns-zero-offset requires offset = zero")


def shaping_feasible(structure: ShapingStructure, Y, y, tol: float = 1e-9) -> bool:
    """Membership of (Y, y) in the structure's parameterization."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n_w = Y.shape[0]
    if y.shape[0] != n_w:
        return False
    fam = structure.family
    if fam == "scaled-identity":
        if Y.shape[0] != Y.shape[1]:
            return False
        r = Y[0, 0]
        ok = r >= -tol and np.allclose(Y, r * np.eye(n_w), atol=tol)
    elif fam == "diagonal":
        if Y.shape[0] != Y.shape[1]:
            return False
        ok = np.allclose(Y, np.diag(np.diag(Y)), atol=tol) and np.all(
            np.diag(Y) >= -tol
        )
    elif fam == "symmetric-psd":
        if Y.shape[0] != Y.shape[1]:
            return False
        ok = np.allclose(Y, Y.T, atol=tol) and (
            np.linalg.eigvalsh(0.5 * (Y + Y.T)).min() >= EPS_PSD - tol
        )
    elif fam == "free-columns-zero-offset":
        ok = True
    else:
        ok = True
    if not ok:
        return False
    if structure.offset == "zero":
        return bool(np.all(np.abs(y) <= tol))
    if structure.offset == "box":
        diag = np.diag(Y) if Y.shape[0] == Y.shape[1] else None
        if diag is None:
            return False
        return bool(np.all(y <= diag + tol) and np.all(-diag - tol <= y))
    return True


@dataclass(frozen=True)
class SizeObjective:
    """Concave size metric on the shaped set Y S + y.

    kinds: log-det-diagonal (sum_i log Y_ii), root-det-2x2, radius,
    linear-weights (sum_i c_i Y_ii), vertex-pushing (sum_j c_j' Y_.j),
    vertex-pulling (-sum_j ||d_j - Y_.j||^2).  ``lam`` is a fixed pre-scale
    on the metric; the tradeoff weight is passed to the synthesis builder.
    """

    kind: str
    vectors: np.ndarray | None = None
    lam: float = 1.0

    _KINDS = (
        "log-det-diagonal",
        "root-det-2x2",
        "radius",
        "linear-weights",
        "vertex-pushing",
        "vertex-pulling",
    )

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.vectors is not None:
            object.__setattr__(
                self, "vectors", np.atleast_2d(np.asarray(self.vectors, dtype=float))
            )
        if self.kind in ("vertex-pushing", "vertex-pulling") and self.vectors is None:
            raise ValueError(f"{self.kind} requires direction/anchor vectors")


def evaluate_objective(obj: SizeObjective, Y, y=None) -> float:
    """Value of the size metric at (Y, y); -inf on domain violations."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if obj.kind == "log-det-diagonal":
        diag = np.diag(Y)
        if np.any(diag <= 0):
            return -math.inf
        return obj.lam * float(np.sum(np.log(diag)))
    if obj.kind == "root-det-2x2":
        det = float(np.linalg.det(Y))
        if det < 0:
            return -math.inf
        return obj.lam * math.sqrt(det)
    if obj.kind == "radius":
        return obj.lam * float(Y[0, 0])
    if obj.kind == "linear-weights":
        w = obj.vectors.ravel() if obj.vectors is not None else np.ones(Y.shape[0])
        return obj.lam * float(w @ np.diag(Y))
    if obj.kind == "vertex-pushing":
        return obj.lam * float(sum(obj.vectors[j] @ Y[:, j] for j in range(Y.shape[1])))
    # vertex-pulling
    return -obj.lam * float(
        sum(np.sum((obj.vectors[j] - Y[:, j]) ** 2) for j in range(Y.shape[1]))
    )


# ---------------------------------------------------------------------------
# primitive-set constructors


def _box_primitive(n: int) -> PrimitiveSet:
    eye = np.eye(n)
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    return PrimitiveSet(
        G=np.vstack([eye, -eye]),
        g=np.ones(2 * n),
        cones=(Cone("nonneg", 2 * n),),
        extreme_points=signs,
    )


def _one_ball_primitive(n: int) -> PrimitiveSet:
    # all sign patterns sigma' s <= 1; 2^n rows
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    ep = np.vstack([np.eye(n), -np.eye(n)])
    return PrimitiveSet(
        G=signs,
        g=np.ones(2**n),
        cones=(Cone("nonneg", 2**n),),
        extreme_points=ep,
    )


def _two_ball_primitive(n: int) -> PrimitiveSet:
    # g - G s = (1, s) in SOC  <=>  ||s||_2 <= 1
    G = np.vstack([np.zeros((1, n)), -np.eye(n)])
    g = np.zeros(n + 1)
    g[0] = 1.0
    return PrimitiveSet(G=G, g=g, cones=(Cone("soc", n + 1),))


def _simplex_primitive(m: int) -> PrimitiveSet:
    # s >= 0 and 1's = 1 (the equality split into two inequality rows)
    G = np.vstack([-np.eye(m), np.ones((1, m)), -np.ones((1, m))])
    g = np.concatenate([np.zeros(m), [1.0, -1.0]])
    return PrimitiveSet(
        G=G,
        g=g,
        cones=(Cone("nonneg", m + 2),),
        extreme_points=np.eye(m),
        equality_pairs=((m, m + 1),),
    )


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class UncertaintyFamily:
    """A template pairing: primitive set + shaping structure + objective.

    The same single-stage primitive is used at every stage of a horizon
    (per-stage data is recovered with :meth:`stage_primitives`).
    """

    template: str
    n_w: int
    primitive: PrimitiveSet
    shaping: ShapingStructure
    objective: SizeObjective
    p: float | None = None
    requires_sdp: bool = False

    @property
    def n_s(self) -> int:
        return self.primitive.n_s

    def stage_primitives(self, N: int) -> list[PrimitiveSet]:
        return [self.primitive] * N

    def with_objective(self, obj: SizeObjective) -> "UncertaintyFamily":
        return UncertaintyFamily(
            self.template, self.n_w, self.primitive, self.shaping, obj,
            p=self.p, requires_sdp=self.requires_sdp,
        )

    def with_offset(self, offset: str) -> "UncertaintyFamily":
        shaping = ShapingStructure(self.shaping.family, offset)
        return UncertaintyFamily(
            self.template, self.n_w, self.primitive, shaping, self.objective,
            p=self.p, requires_sdp=self.requires_sdp,
        )

    def with_primitive(self, primitive: PrimitiveSet) -> "UncertaintyFamily":
        return UncertaintyFamily(
            self.template, self.n_w, primitive, self.shaping, self.objective,
            p=self.p, requires_sdp=self.requires_sdp,
        )

    # -- sampling and geometry --------------------------------------------

    def sample_primitive(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n approximately uniform samples from the primitive set, (n, n_s)."""
        d = self.n_s
        if self.template == "ball" and self.p == 2 or self.template == "ellipsoid":
            x = rng.normal(size=(n, d))
            x /= np.linalg.norm(x, axis=1, keepdims=True)
            radii = rng.uniform(size=(n, 1)) ** (1.0 / d)
            return x * radii
        if self.template == "ball" and self.p == 1:
            simplex = rng.dirichlet(np.ones(d + 1), size=n)[:, :d]
            signs = rng.choice((-1.0, 1.0), size=(n, d))
            return simplex * signs
        if self.template in ("ball", "rectangle"):  # p = inf box (maybe shifted)
            bounds = self.primitive.coordinate_bounds()
            return rng.uniform(bounds[:, 0], bounds[:, 1], size=(n, d))
        if self.template == "polytope":
            return rng.dirichlet(np.ones(d), size=n)
        raise ValueError(f"no sampler for template {self.template!r}")

    def set_contains(self, Y, y, w, tol: float = 1e-9) -> bool:
        """Direct geometric membership of w in Y S + y for this template."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        w = np.asarray(w, dtype=float).ravel()
        if self.template == "ball":
            r = Y[0, 0]
            return float(np.linalg.norm(w - y, ord=self.p)) <= r + tol
        if self.template == "ellipsoid":
            vals, vecs = np.linalg.eigh(0.5 * (Y + Y.T))
            if vals.min() <= 0:
                return bool(np.linalg.norm(w - y) <= tol)
            z = vecs.T @ (w - y) / vals
            return float(np.linalg.norm(z)) <= 1.0 + tol
        if self.template == "rectangle":
            return bool(np.all(np.abs(w - y) <= np.diag(Y) + tol))
        if self.template == "polytope":
            return _in_convex_hull(Y.T, w, tol=tol)
        raise ValueError(f"no membership test for template {self.template!r}")


def _in_convex_hull(points: np.ndarray, w: np.ndarray, tol: float = 1e-9) -> bool:
    """LP test: is w a convex combination of the given points (rows)?"""
    from scipy.optimize import linprog

    m, d = points.shape
    A_eq = np.vstack([points.T, np.ones((1, m))])
    b_eq = np.concatenate([w, [1.0]])
    res = linprog(
        np.zeros(m), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * m, method="highs"
    )
    if res.status == 0:
        return True
    # retry with tolerance slack on the equality
    res = linprog(
        np.zeros(m),
        A_ub=np.vstack([A_eq, -A_eq]),
        b_ub=np.concatenate([b_eq + tol, -b_eq + tol]),
        bounds=[(0, None)] * m,
        method="highs",
    )
    return res.status == 0


def make_ball(p, n_w: int) -> UncertaintyFamily:
    """p-norm ball family: W = {w : ||w - y||_p <= r}, Y = r I."""
    if p not in (1, 2, math.inf) and p != "inf":
        raise ValueError("supported ball norms are p in {1, 2, inf}")
    p = math.inf if p == "inf" else p
    if p == 2:
        prim = _two_ball_primitive(n_w)
    elif p == 1:
        prim = _one_ball_primitive(n_w)
    else:
        prim = _box_primitive(n_w)
    return UncertaintyFamily(
        template="ball",
        n_w=n_w,
        primitive=prim,
        shaping=ShapingStructure("scaled-identity", "free"),
        objective=SizeObjective("radius"),
        p=p,
    )


def make_ellipsoid(n_w: int) -> UncertaintyFamily:
    """Ellipsoid family: W = {w : (w-y)' (YY)^-1 (w-y) <= 1}, Y = Y' > 0.

    The log-det volume objective is realized through the root-det SOC path
    for n_w <= 2; larger n_w is emitted for an SDP-capable backend.
    """
    return UncertaintyFamily(
        template="ellipsoid",
        n_w=n_w,
        primitive=_two_ball_primitive(n_w),
        shaping=ShapingStructure("symmetric-psd", "free"),
        objective=SizeObjective("root-det-2x2"),
        p=2,
        requires_sdp=n_w > 2,
    )


def make_rectangle(n_w: int, weights=None) -> UncertaintyFamily:
    """Axis-aligned rectangle family: W = {w : |w - y| <= diag(Y)}.

    Default objective is sum_i log Y_ii (volume); pass ``weights`` for the
    linear weighted-circumference objective instead.
    """
    if weights is None:
        obj = SizeObjective("log-det-diagonal")
    else:
        obj = SizeObjective("linear-weights", vectors=np.asarray(weights, float))
    return UncertaintyFamily(
        template="rectangle",
        n_w=n_w,
        primitive=_box_primitive(n_w),
        shaping=ShapingStructure("diagonal", "free"),
        objective=obj,
        p=math.inf,
    )


def make_polytope(n_w: int, m: int, objective: SizeObjective) -> UncertaintyFamily:
    """Polytope family with m vertices: W = conv(Y_.1, ..., Y_.m), y = 0."""
    if m < n_w:
        raise ValueError("polytope family requires m >= n_w vertices")
    if objective.kind not in ("vertex-pushing", "vertex-pulling"):
        raise ValueError("polytope family takes a vertex-pushing/pulling objective")
    if objective.vectors.shape != (m, n_w):
        raise ValueError(f"objective needs exactly {m} vectors of dim {n_w}")
    return UncertaintyFamily(
        template="polytope",
        n_w=n_w,
        primitive=_simplex_primitive(m),
        shaping=ShapingStructure("free-columns-zero-offset", "zero"),
        objective=objective,
    )


def circle_anchors(m: int, radius: float) -> np.ndarray:
    """m anchor points uniformly spaced on a centered circle of given radius."""
    ang = 2.0 * np.pi * np.arange(m) / m
    return radius * np.column_stack([np.cos(ang), np.sin(ang)])
