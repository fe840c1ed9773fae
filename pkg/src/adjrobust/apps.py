"""Application builders: frequency-reserve provision and robustness analysis.

Reserve provision: a building offers a per-hour reserve capacity band to
the grid, tracked exactly through its HVAC consumption, trading the
reward for capacity against the electricity cost of the nominal plan.
Robustness analysis: find the largest disturbance set (in a chosen
family) a constrained system can tolerate over the horizon.

The building here is a deliberately small 3-state thermal surrogate
(room / inner-wall / outer-wall temperature deviations, one-hour step)
with four actuators; it is not calibrated to any published building, so
everything asserted about it is structural rather than value-matching.
"""

from __future__ import annotations

import csv
import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import (
    LinearSystem,
    PolytopicSet,
    StackedProblem,
    StageCost,
    build_stacked,
)
from .reformulate import ShapedSolution, build_synthesis, solve_counterpart
from .uncertainty import (
    Cone,
    PrimitiveSet,
    ShapingStructure,
    SizeObjective,
    UncertaintyFamily,
    circle_anchors,
    make_ellipsoid,
    make_polytope,
    make_rectangle,
)

CAPACITY_MODES = ("symmetric", "asymmetric", "positive-only", "negative-only")


def default_building(decoupled: bool = False) -> LinearSystem:
    """3-state RC-chain surrogate in deviation coordinates, 1-hour step.

    States: room, inner-wall and outer-wall temperature deviations.
    Inputs: radiator, cooled ceiling, floor heating, ventilation.
    ``decoupled=True`` zeroes the state coupling (A = 0), which makes each
    stage's economics independent — handy for threshold-behavior checks.
    """
    A = np.array(
        [
            [0.78, 0.15, 0.02],
            [0.10, 0.83, 0.05],
            [0.02, 0.05, 0.86],
        ]
    )
    if decoupled:
        A = np.zeros((3, 3))
    B = np.array(
        [
            [0.060, -0.040, 0.020, 0.030],
            [0.010, -0.008, 0.030, 0.002],
            [0.000, 0.000, 0.002, 0.000],
        ]
    )
    # exogenous channels: ambient temperature, solar radiation, occupancy
    E = np.array(
        [
            [0.030, 0.020, 0.010],
            [0.000, 0.010, 0.000],
            [0.080, 0.005, 0.000],
        ]
    )
    return LinearSystem(A, B, E)


def default_exogenous(N: int) -> np.ndarray:
    """Mild diurnal exogenous profile (deviations), shape (N, 3)."""
    k = np.arange(N)
    ambient = -1.0 + 1.5 * np.sin(2.0 * np.pi * (k - 8) / 24.0)
    solar = np.clip(np.sin(2.0 * np.pi * (k - 6) / 24.0), 0.0, None)
    occupancy = ((k % 24 >= 8) & (k % 24 < 18)).astype(float)
    return np.column_stack([ambient, solar, occupancy])


@dataclass(frozen=True)
class ReserveProblem:
    """Reserve-provision instance on a thermal building surrogate.

    The reserve demand w_k is scalar; it must be matched exactly by the
    consumption change of the causal adjustment input.  ``mode`` selects
    the capacity band: symmetric [-Y_k, Y_k], asymmetric [-Y_k + y_k
    shifted within the band], positive-only [0, Y_k] or negative-only
    [-Y_k, 0].  Comfort bounds act on the room-temperature state.
    """

    building: LinearSystem
    eta: np.ndarray
    prices: np.ndarray
    lam: float
    v: np.ndarray
    comfort_lo: np.ndarray
    comfort_hi: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray
    x0: np.ndarray
    mode: str = "symmetric"

    def __post_init__(self):
        for name in ("eta", "prices", "comfort_lo", "comfort_hi", "u_min", "u_max", "x0"):
            object.__setattr__(
                self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            )
        object.__setattr__(self, "v", np.atleast_2d(np.asarray(self.v, dtype=float)))
        if self.mode not in CAPACITY_MODES:
            raise ValueError(f"mode must be one of {CAPACITY_MODES}")
        if not np.any(self.eta):
            raise ValueError("eta must be nonzero")
        N = self.N
        if self.v.shape[0] != N:
            raise ValueError("exogenous input length must equal the horizon")
        for name in ("comfort_lo", "comfort_hi"):
            if getattr(self, name).shape[0] != N:
                raise ValueError(f"{name} must have one entry per stage")
        if self.lam < 0:
            raise ValueError("reward factor must be >= 0")

    @property
    def N(self) -> int:
        return self.prices.shape[0]

    @property
    def n_act(self) -> int:
        return self.building.n_u


def default_reserve(
    N: int = 24,
    lam: float = 30.0,
    prices=None,
    mode: str = "symmetric",
    decoupled: bool = False,
) -> ReserveProblem:
    """Ready-to-solve reserve instance on the default surrogate."""
    if prices is None:
        k = np.arange(N)
        prices = 28.0 + 10.0 * np.sin(2.0 * np.pi * (k - 9) / 24.0) ** 2
    prices = np.asarray(prices, dtype=float)
    N = prices.shape[0]
    sys = default_building(decoupled=decoupled)
    return ReserveProblem(
        building=sys,
        eta=np.array([1.0, 0.5, 0.8, 0.4]),
        prices=prices,
        lam=lam,
        v=default_exogenous(N),
        comfort_lo=np.full(N, -1.0),
        comfort_hi=np.full(N, 3.0),
        u_min=np.zeros(4),
        u_max=np.full(4, 10.0),
        x0=np.zeros(3),
        mode=mode,
    )


def _shifted_box_primitive(lo: float, hi: float) -> PrimitiveSet:
    """1-D interval primitive {s : lo <= s <= hi}."""
    return PrimitiveSet(
        G=np.array([[1.0], [-1.0]]),
        g=np.array([hi, -lo]),
        cones=(Cone("nonneg", 2),),
        extreme_points=np.array([[lo], [hi]]),
    )


def reserve_family(mode: str) -> UncertaintyFamily:
    """Scalar capacity-band family for the chosen mode; size = sum_k Y_k."""
    if mode not in CAPACITY_MODES:
        raise ValueError(f"mode must be one of {CAPACITY_MODES}")
    obj = SizeObjective("linear-weights", vectors=np.ones(1))
    if mode == "symmetric":
        prim, offset = _shifted_box_primitive(-1.0, 1.0), "zero"
    elif mode == "asymmetric":
        prim, offset = _shifted_box_primitive(-1.0, 1.0), "box"
    elif mode == "positive-only":
        prim, offset = _shifted_box_primitive(0.0, 1.0), "zero"
    else:  # negative-only
        prim, offset = _shifted_box_primitive(-1.0, 0.0), "zero"
    return UncertaintyFamily(
        template="rectangle",
        n_w=1,
        primitive=prim,
        shaping=ShapingStructure("diagonal", offset),
        objective=obj,
    )


def build_reserve(rp: ReserveProblem):
    """Stack the reserve problem; returns (StackedProblem, family, lam).

    The stacked input at stage k is [u_k; du_k]: u_k is the strictly
    causal nominal plan, du_k the causal adjustment that tracks the
    reserve demand through eta' du_k = w_k (imposed as paired
    inequalities).  Actuator bounds act on the combined input u + du.
    """
    sys, N, n_act = rp.building, rp.N, rp.n_act
    n_u = 2 * n_act
    # combined-input dynamics with no direct disturbance feedthrough
    sys2 = LinearSystem(sys.A, np.hstack([sys.B, sys.B]), np.zeros((sys.n_x, 1)))
    X = PolytopicSet(
        np.array([[1.0] + [0.0] * (sys.n_x - 1), [-1.0] + [0.0] * (sys.n_x - 1)]),
        np.array([rp.comfort_hi[0], -rp.comfort_lo[0]]),
    )
    eye2 = np.eye(n_act)
    U = PolytopicSet(
        np.block([[eye2, eye2], [-eye2, -eye2]]),
        np.concatenate([rp.u_max, -rp.u_min]),
    )
    v_eff = rp.v @ sys.E.T
    spb = build_stacked(sys2, X, U, StageCost.zero(sys.n_x, n_u), rp.x0, N, v=v_eff)

    # per-stage comfort bounds (rows are labeled ("state", k, i))
    d = spb.d.copy()
    for r, lab in enumerate(spb.row_labels):
        kind, k, i = lab
        if kind == "state":
            base = rp.comfort_hi[k - 1] if i == 0 else -rp.comfort_lo[k - 1]
            d[r] += base - (rp.comfort_hi[0] if i == 0 else -rp.comfort_lo[0])

    # exact matching  eta' du_k = w_k  as paired inequality rows
    m0 = spb.C.shape[0]
    Cm = np.zeros((2 * N, N * n_u))
    Dm = np.zeros((2 * N, N))
    for k in range(N):
        Cm[2 * k, k * n_u + n_act : (k + 1) * n_u] = rp.eta
        Dm[2 * k, k] = -1.0
        Cm[2 * k + 1] = -Cm[2 * k]
        Dm[2 * k + 1] = -Dm[2 * k]
    labels = list(spb.row_labels) + [
        ("match", k, s) for k in range(N) for s in (0, 1)
    ]

    # worst-case electricity cost  sum_k c_k eta' u_k  on the nominal block
    c = np.zeros(N * n_u)
    for k in range(N):
        c[k * n_u : k * n_u + n_act] = rp.prices[k] * rp.eta

    # nominal plan strictly causal, adjustment causal
    mask = np.zeros((N * n_u, N), dtype=bool)
    for k in range(N):
        mask[k * n_u : k * n_u + n_act, :k] = True
        mask[k * n_u + n_act : (k + 1) * n_u, : k + 1] = True

    stacked = StackedProblem(
        c=c,
        C=np.vstack([spb.C, Cm]),
        D=np.vstack([np.zeros((m0, N)), Dm]),
        d=np.concatenate([d, np.zeros(2 * N)]),
        N=N,
        n_u=n_u,
        n_w=1,
        causality=mask,
        cost_offset=spb.cost_offset,
        row_labels=tuple(labels),
    )
    return stacked, reserve_family(rp.mode), rp.lam


@dataclass(frozen=True)
class RobustnessProblem:
    """Largest-tolerable-disturbance instance: maximize the set size
    subject to the existence of a feasible policy, with no nominal cost."""

    system: LinearSystem
    X: PolytopicSet
    U: PolytopicSet
    x0: np.ndarray
    N: int = 1
    family: str = "rectangle"
    m: int = 30
    anchor_radius: float = 40.0

    def __post_init__(self):
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        if self.family not in ("rectangle", "ellipsoid", "polytope"):
            raise ValueError("family must be rectangle, ellipsoid or polytope")


def default_robustness(family: str = "rectangle", m: int = 30, radius: float = 40.0):
    """One-step two-state benchmark instance for set maximization."""
    F = np.array(
        [
            [1, 0], [-1, 0], [0, 1], [0, -1],
            [-1, 1], [1, -1], [1, 1], [-1, -1],
        ],
        dtype=float,
    )
    f = np.array([10, 10, 10, 10, 15, 15, 15, 15], dtype=float)
    return RobustnessProblem(
        system=LinearSystem(np.eye(2), np.array([[1.0], [0.7]]), -np.eye(2)),
        X=PolytopicSet(F, f),
        U=PolytopicSet(np.array([[1.0], [-1.0]]), np.array([5.0, 5.0])),
        x0=np.zeros(2),
        N=1,
        family=family,
        m=m,
        anchor_radius=radius,
    )


def build_robustness(rb: RobustnessProblem):
    """Stack the set-maximization problem; returns (StackedProblem, family, lam).

    The cost is pure set size (no nominal term), so the synthesis epigraph
    carries only the robust feasibility of the policy.
    """
    spb = build_stacked(
        rb.system, rb.X, rb.U, StageCost.zero(rb.system.n_x, rb.system.n_u),
        rb.x0, rb.N,
    )
    n_w = rb.system.n_w
    if rb.family == "rectangle":
        fam = make_rectangle(n_w)
    elif rb.family == "ellipsoid":
        fam = make_ellipsoid(n_w)
    else:
        fam = make_polytope(
            n_w, rb.m,
            SizeObjective("vertex-pulling", vectors=circle_anchors(rb.m, rb.anchor_radius)),
        )
    return spb, fam, 1.0


def ingest_prices(path) -> np.ndarray:
    """Read an hour,price CSV into an ordered price vector.

    Hours must be 0..N-1 in order; errors name the offending row.
    """
    prices = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["hour", "price"]:
            raise ValueError("price CSV must start with a 'hour,price' header")
        for rownum, row in enumerate(reader, start=2):
            if len(row) < 2:
                raise ValueError(f"row {rownum}: expected 'hour,price'")
            try:
                hour, price = int(row[0]), float(row[1])
            except ValueError as exc:
                raise ValueError(f"row {rownum}: {exc}") from None
            if hour != len(prices):
                raise ValueError(
                    f"row {rownum}: expected hour {len(prices)}, got {hour}"
                )
            prices.append(price)
    if not prices:
        raise ValueError("price CSV contains no data rows")
    return np.array(prices)


@dataclass(frozen=True)
class BidRow:
    """One point of the reserve bid curve."""

    lam: float
    total_reserve: float
    nominal_energy: float
    status: str
    solution: ShapedSolution | None = field(default=None, compare=False)


def reserve_summary(rp: ReserveProblem, sol: ShapedSolution) -> tuple[float, float]:
    """(total reserve sum_k Y_k, nominal consumption at zero demand)."""
    total = float(sum(Yk[0, 0] for Yk in sol.Y))
    # zero demand corresponds to the primitive point s with Y s + y = 0
    nominal = 0.0
    if sol.p is not None:
        n_act = rp.n_act
        eta2 = np.concatenate([rp.eta, rp.eta])
        s0 = np.zeros(rp.N)
        for k in range(rp.N):
            Yk = sol.Y[k][0, 0]
            if Yk > 1e-12:
                s0[k] = float(np.clip(-sol.y[k][0] / Yk, -1.0, 1.0))
        u = sol.P @ s0 + sol.p
        nominal = float(
            sum(eta2 @ u[k * 2 * n_act : (k + 1) * 2 * n_act] for k in range(rp.N))
        )
    return total, nominal


def bid_curve(rp: ReserveProblem, lam_grid, backend: str = "builtin", max_workers=None):
    """Synthesis solve per reward factor; rows sorted by lam.

    Individual solve failures are recorded in the row status, not raised.
    """
    lam_grid = sorted(float(v) for v in lam_grid)
    if not lam_grid:
        raise ValueError("lam grid must be nonempty")

    def one(lam: float) -> BidRow:
        rpl = dataclasses.replace(rp, lam=lam)
        spb, fam, _ = build_reserve(rpl)
        try:
            sol = solve_counterpart(build_synthesis(spb, fam, lam), backend=backend)
        except Exception as exc:  # recorded, not fatal
            return BidRow(lam, float("nan"), float("nan"), f"error: {exc}")
        if not sol.ok:
            return BidRow(lam, float("nan"), float("nan"), sol.status, sol)
        total, nominal = reserve_summary(rpl, sol)
        return BidRow(lam, total, nominal, sol.status, sol)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        rows = list(pool.map(one, lam_grid))
    return rows


def reserve_series_csv(sol: ShapedSolution) -> str:
    """Stage-wise capacity series (stage, Y_k) as CSV text."""
    lines = ["stage,capacity"]
    lines += [f"{k},{Yk[0, 0]:.10g}" for k, Yk in enumerate(sol.Y)]
    return "\n".join(lines) + "\n"


def bid_curve_csv(rows) -> str:
    """Bid-curve rows (lam, total reserve, nominal energy, status) as CSV."""
    lines = ["lam,total_reserve,nominal_energy,status"]
    lines += [
        f"{r.lam:.10g},{r.total_reserve:.10g},{r.nominal_energy:.10g},{r.status}"
        for r in rows
    ]
    return "\n".join(lines) + "\n"
