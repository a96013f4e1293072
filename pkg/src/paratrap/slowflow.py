"""Averaged amplitude-phase dynamics of the parametrically driven mode.

With the envelope ansatz x(t) = A(t) cos(w_d t / 2 + phi(t)) near the
principal parametric resonance, the slow equations are

    dA/dt   = -(gamma/2) A + (eps w_x / 4) A sin(2 phi)
    dphi/dt =  (eps w_x / 4) cos(2 phi) + lambda4 A^2 + lambda6 A^4

For gamma = 0 the flow is Hamiltonian in (J = A^2/2, phi) with

    H = (eps w_x / 4) J cos(2 phi) + lambda4 J^2 + (4/3) lambda6 J^3,

whose H = 0 level set is the figure-eight separatrix through the origin:
states inside a lobe circle exactly one attractor (frequency-locked), states
outside circle both (zero average amplitude).

Integration uses the equivalent Cartesian form (X, Y) = A (cos phi, sin phi),

    dX/dt = -(gamma/2) X + (k - S) Y,   k = eps w_x / 4,
    dY/dt = -(gamma/2) Y + (k + S) X,   S = lambda4 A^2 + lambda6 A^4,

which is polynomial and regular at the origin.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .core import CODATA, DriveSchedule, PhysicalConstants, TrapParams

# fixed-point classifications
CENTER = "center"
SADDLE = "saddle"
STABLE_FOCUS = "stable focus"
UNSTABLE_FOCUS = "unstable focus"
STABLE_NODE = "stable node"
UNSTABLE_NODE = "unstable node"

_ENSEMBLE_BLOCK = 128  # fixed block size keeps results worker-count independent


class Basin(enum.Enum):
    LEFT_LOBE = "left"
    RIGHT_LOBE = "right"
    OUTSIDE = "outside"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class SlowState:
    """Envelope state: amplitude A >= 0 (m) and phase phi (rad)."""

    amplitude: float
    phase: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")

    def cartesian(self) -> tuple:
        return (self.amplitude * math.cos(self.phase),
                self.amplitude * math.sin(self.phase))

    @classmethod
    def from_cartesian(cls, x: float, y: float) -> "SlowState":
        return cls(math.hypot(x, y), math.atan2(y, x))


@dataclass(frozen=True)
class SlowFlowParams:
    """Slow-flow coefficients and the drive schedule supplying eps(t)."""

    omega_x: float
    lambda4: float
    lambda6: float
    gamma: float = 0.0
    schedule: DriveSchedule = field(default_factory=DriveSchedule)

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.omega_x <= 0:
            raise ValueError("omega_x must be positive")

    @classmethod
    def from_trap(cls, trap: TrapParams, schedule: DriveSchedule,
                  gamma: float = 0.0) -> "SlowFlowParams":
        return cls(trap.omega_x, trap.lambda4, trap.lambda6, gamma, schedule)

    def pump_rate(self, epsilon: float) -> float:
        """k = eps w_x / 4, the parametric pump rate."""
        return 0.25 * epsilon * self.omega_x


def slowflow_rhs(state: SlowState, t: float, params: SlowFlowParams) -> tuple:
    """(dA/dt, dphi/dt) of the averaged equations at time ``t``."""
    eps = params.schedule.epsilon(t)
    k = params.pump_rate(eps)
    a = state.amplitude
    s2 = math.sin(2.0 * state.phase)
    c2 = math.cos(2.0 * state.phase)
    da = -0.5 * params.gamma * a + k * a * s2
    dphi = k * c2 + params.lambda4 * a**2 + params.lambda6 * a**4
    return da, dphi


def cartesian_field(x, y, params: SlowFlowParams, epsilon: float):
    """(dX/dt, dY/dt) of the Cartesian slow flow at fixed drive strength."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = params.pump_rate(epsilon)
    a2 = x * x + y * y
    shift = (params.lambda4 + params.lambda6 * a2) * a2
    dx = -0.5 * params.gamma * x + (k - shift) * y
    dy = -0.5 * params.gamma * y + (k + shift) * x
    return dx, dy


def slow_hamiltonian(state: SlowState, params: SlowFlowParams,
                     epsilon: float) -> float:
    """Conserved quantity of the gamma = 0 flow (units m^2 rad/s).

    H = k J cos(2 phi) + lambda4 J^2 + (4/3) lambda6 J^3 with J = A^2/2;
    the flow satisfies dJ/dt = -dH/dphi, dphi/dt = dH/dJ.
    """
    j = 0.5 * state.amplitude**2
    k = params.pump_rate(epsilon)
    return (k * j * math.cos(2.0 * state.phase)
            + params.lambda4 * j * j
            + (4.0 / 3.0) * params.lambda6 * j**3)


@dataclass(frozen=True)
class FixedPoint:
    amplitude: float
    phase: float
    kind: str

    def state(self) -> SlowState:
        return SlowState(self.amplitude, self.phase)


def _classify_cartesian(x0: float, y0: float, params: SlowFlowParams,
                        epsilon: float, scale: float) -> str:
    h = max(scale, 1e-12) * 1e-6
    j = np.empty((2, 2))
    for col, (dx, dy) in enumerate(((h, 0.0), (0.0, h))):
        fp = cartesian_field(x0 + dx, y0 + dy, params, epsilon)
        fm = cartesian_field(x0 - dx, y0 - dy, params, epsilon)
        j[0, col] = (fp[0] - fm[0]) / (2.0 * h)
        j[1, col] = (fp[1] - fm[1]) / (2.0 * h)
    eig = np.linalg.eigvals(j)
    mag = max(np.max(np.abs(eig)), 1e-30)
    re = np.real(eig)
    im = np.imag(eig)
    if re[0] * re[1] < -1e-12 * mag * mag:
        return SADDLE
    if np.all(np.abs(re) <= 1e-9 * mag):
        return CENTER
    oscillatory = np.any(np.abs(im) > 1e-9 * mag)
    if np.all(re < 0):
        return STABLE_FOCUS if oscillatory else STABLE_NODE
    if np.all(re > 0):
        return UNSTABLE_FOCUS if oscillatory else UNSTABLE_NODE
    return SADDLE


def fixed_points(params: SlowFlowParams, epsilon: float,
                 a_max: float = 150e-6) -> list[FixedPoint]:
    """All fixed points of the slow flow with A <= a_max, classified.

    For gamma = 0 these satisfy sin(2 phi*) = 0 and
    k cos(2 phi*) + lambda4 A*^2 + lambda6 A*^4 = 0; with damping the phase
    condition becomes sin(2 phi*) = 2 gamma / (eps w_x).  The origin is
    always reported (it is the only fixed point when no other roots exist).
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    k = params.pump_rate(epsilon)
    points = []

    def add(amplitude: float, phase: float):
        x0 = amplitude * math.cos(phase)
        y0 = amplitude * math.sin(phase)
        kind = _classify_cartesian(x0, y0, params, epsilon, max(amplitude, a_max * 1e-3))
        points.append(FixedPoint(amplitude, phase % (2.0 * math.pi), kind))

    add(0.0, 0.0)

    branches = []
    if k > 0.0:
        if params.gamma == 0.0:
            branches = [(0.0, 1.0), (0.0, -1.0)]
        else:
            s = 0.5 * params.gamma / k if k > 0 else math.inf
            if s <= 1.0:
                c = math.sqrt(1.0 - s * s)
                branches = [(s, c), (s, -c)]
    elif params.lambda6 != 0.0:
        # drive off: nonzero roots of lambda4 A^2 + lambda6 A^4 = 0
        u = -params.lambda4 / params.lambda6
        if u > 0 and math.sqrt(u) <= a_max:
            for phase in np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False):
                add(math.sqrt(u), float(phase))

    for s2, c2 in branches:
        # amplitude equation: k c2 + lambda4 u + lambda6 u^2 = 0, u = A^2
        if params.lambda6 != 0.0:
            roots = np.roots([params.lambda6, params.lambda4, k * c2])
        elif params.lambda4 != 0.0:
            roots = np.array([-k * c2 / params.lambda4])
        else:
            roots = np.array([])
        theta = math.atan2(s2, c2)
        for u in roots:
            if abs(np.imag(u)) > 1e-9 * max(abs(u), 1e-300):
                continue
            u = float(np.real(u))
            if u <= 0:
                continue
            amplitude = math.sqrt(u)
            if amplitude > a_max:
                continue
            for branch_phase in (0.5 * theta, 0.5 * theta + math.pi):
                add(amplitude, branch_phase)

    points.sort(key=lambda p: (p.amplitude, p.phase))
    return points


def attracting_points(params: SlowFlowParams, epsilon: float,
                      a_max: float = 150e-6) -> list[FixedPoint]:
    """The nonzero centers/foci the locked motion orbits (two, symmetric)."""
    kinds = (CENTER, STABLE_FOCUS, STABLE_NODE)
    return [p for p in fixed_points(params, epsilon, a_max)
            if p.amplitude > 0 and p.kind in kinds]


def _lobe_tip_amplitude(params: SlowFlowParams, epsilon: float,
                        phase: float) -> float:
    """Amplitude where the H = 0 separatrix crosses the attractor axis."""
    k = params.pump_rate(epsilon)
    c2 = math.cos(2.0 * phase)
    # H(J)/J = k c2 / ... : 0 = k c2 + lambda4 J + (4/3) lambda6 J^2
    coeffs = [(4.0 / 3.0) * params.lambda6, params.lambda4, k * c2]
    if coeffs[0] == 0.0 and coeffs[1] == 0.0:
        return math.inf
    roots = np.roots(coeffs) if coeffs[0] != 0.0 else np.array([-coeffs[2] / coeffs[1]])
    real = [float(np.real(r)) for r in roots
            if abs(np.imag(r)) < 1e-9 * max(abs(r), 1e-300) and np.real(r) > 0]
    if not real:
        return math.inf
    return math.sqrt(2.0 * min(real))


def classify_basin(state: SlowState, params: SlowFlowParams, epsilon: float,
                   boundary_tol: float | None = None) -> Basin:
    """Which side of the figure-eight separatrix a state lies on (gamma = 0).

    Lobe membership is decided by the sign of H relative to the separatrix
    level H = 0 together with the lobe extent along the attractor axis; the
    side is the sign of the projection onto that axis.  States with |H|
    below the boundary tolerance are flagged rather than guessed.
    """
    if params.gamma != 0.0:
        raise ValueError("basin classification is defined for the gamma = 0 flow")
    attractors = attracting_points(params, epsilon)
    h_state = slow_hamiltonian(state, params, epsilon)
    if not attractors:
        return Basin.OUTSIDE
    ref = min(attractors, key=lambda p: (p.phase + math.pi / 2) % math.pi)
    phase0 = ref.phase if ref.phase < math.pi else ref.phase - math.pi
    h_ref = slow_hamiltonian(ref.state(), params, epsilon)
    if boundary_tol is None:
        boundary_tol = 1e-9 * params.pump_rate(epsilon) * ref.amplitude**2
    if abs(h_state) <= boundary_tol:
        return Basin.BOUNDARY
    if math.copysign(1.0, h_state) != math.copysign(1.0, h_ref):
        return Basin.OUTSIDE
    if state.amplitude > _lobe_tip_amplitude(params, epsilon, phase0):
        return Basin.OUTSIDE
    x, y = state.cartesian()
    side = x * math.cos(phase0) + y * math.sin(phase0)
    return Basin.RIGHT_LOBE if side >= 0 else Basin.LEFT_LOBE


# -- integration ------------------------------------------------------------


@dataclass
class SlowTrajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray

    @property
    def amplitude(self) -> np.ndarray:
        return np.hypot(self.x, self.y)

    @property
    def phase(self) -> np.ndarray:
        return np.arctan2(self.y, self.x)


def _cartesian_rhs(params: SlowFlowParams):
    lam4 = params.lambda4
    lam6 = params.lambda6
    gamma = params.gamma
    omega_x = params.omega_x
    schedule = params.schedule

    def rhs(t, z):
        half = z.size // 2
        x = z[:half]
        y = z[half:]
        k = 0.25 * schedule.epsilon(t) * omega_x
        a2 = x * x + y * y
        shift = (lam4 + lam6 * a2) * a2
        out = np.empty_like(z)
        out[:half] = -0.5 * gamma * x + (k - shift) * y
        out[half:] = -0.5 * gamma * y + (k + shift) * x
        return out

    return rhs


def integrate_state(state: SlowState, params: SlowFlowParams, t_end: float,
                    t_eval=None, rtol: float = 1e-10,
                    atol: float = 1e-16) -> SlowTrajectory:
    """Integrate one envelope trajectory; returns Cartesian samples."""
    x0, y0 = state.cartesian()
    sol = solve_ivp(_cartesian_rhs(params), (0.0, t_end), np.array([x0, y0]),
                    method="DOP853", rtol=rtol, atol=atol, t_eval=t_eval,
                    dense_output=False)
    if not sol.success:
        raise RuntimeError(f"slow-flow integration failed: {sol.message}")
    return SlowTrajectory(sol.t, sol.y[0], sol.y[1])


@dataclass
class EnsembleRecord:
    index: int
    a0: float
    phi0: float
    h0: float
    side: int
    mean_x: float
    mean_y: float
    ok: bool


@dataclass
class EnsembleResult:
    records: list
    window: tuple
    cluster_positive: tuple | None
    cluster_negative: tuple | None
    failure_count: int

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("index,A0,phi0,side,mean_Acos,mean_Asin,H0\n")
            for r in self.records:
                fh.write(f"{r.index},{r.a0!r},{r.phi0!r},{r.side},"
                         f"{r.mean_x!r},{r.mean_y!r},{r.h0!r}\n")


def evolve_ensemble(initials, params: SlowFlowParams, t_end: float, *,
                    average_window: tuple | None = None,
                    rtol: float = 1e-9, atol: float = 1e-16,
                    samples: int = 2048) -> EnsembleResult:
    """Integrate an ensemble of envelope states and report capture sides.

    ``initials`` is a sequence of SlowState or an (N, 2) array of
    (amplitude, phase).  Each trajectory's Cartesian position is averaged
    over ``average_window`` (default: ramp end to t_end) and the side is the
    sign of the averaged A cos(phi).  Trajectories are integrated in fixed
    blocks, so results do not depend on how work is distributed.
    """
    arr = np.asarray([
        (s.amplitude, s.phase) if isinstance(s, SlowState) else tuple(s)
        for s in initials
    ], dtype=float)
    n = arr.shape[0]
    if average_window is None:
        average_window = (params.schedule.ramp_end, t_end)
    w0, w1 = average_window
    if not 0.0 <= w0 < w1 <= t_end:
        raise ValueError("average window must lie within [0, t_end]")
    t_eval = np.linspace(w0, w1, samples)
    eps0 = params.schedule.epsilon(0.0)

    x0 = arr[:, 0] * np.cos(arr[:, 1])
    y0 = arr[:, 0] * np.sin(arr[:, 1])
    rhs = _cartesian_rhs(params)

    mean_x = np.full(n, np.nan)
    mean_y = np.full(n, np.nan)
    ok = np.zeros(n, dtype=bool)

    def run_block(idx):
        z0 = np.concatenate([x0[idx], y0[idx]])
        sol = solve_ivp(rhs, (0.0, t_end), z0, method="DOP853",
                        rtol=rtol, atol=atol, t_eval=t_eval)
        if not sol.success:
            return False
        half = idx.size
        xs = sol.y[:half]
        ys = sol.y[half:]
        good = np.all(np.isfinite(xs), axis=1) & np.all(np.isfinite(ys), axis=1)
        mean_x[idx[good]] = xs[good].mean(axis=1)
        mean_y[idx[good]] = ys[good].mean(axis=1)
        ok[idx[good]] = True
        return True

    for start in range(0, n, _ENSEMBLE_BLOCK):
        idx = np.arange(start, min(start + _ENSEMBLE_BLOCK, n))
        if not run_block(idx):
            for i in idx:  # fall back to singles so one bad state cannot sink a block
                run_block(np.array([i]))

    records = []
    for i in range(n):
        h0 = slow_hamiltonian(SlowState(arr[i, 0], arr[i, 1]), params, eps0)
        side = int(np.sign(mean_x[i])) if ok[i] and np.isfinite(mean_x[i]) else 0
        records.append(EnsembleRecord(i, float(arr[i, 0]), float(arr[i, 1]), h0,
                                      side, float(mean_x[i]), float(mean_y[i]),
                                      bool(ok[i])))

    def cluster(sign):
        sel = [r for r in records if r.ok and r.side == sign]
        if not sel:
            return None
        return (float(np.mean([r.mean_x for r in sel])),
                float(np.mean([r.mean_y for r in sel])))

    return EnsembleResult(
        records=records,
        window=(w0, w1),
        cluster_positive=cluster(1),
        cluster_negative=cluster(-1),
        failure_count=int(np.sum(~ok)),
    )


def thermal_slow_states(n: int, temperature: float, omega_x: float,
                        omega_d: float, rng: np.random.Generator,
                        constants: PhysicalConstants = CODATA) -> np.ndarray:
    """Thermal ensemble mapped to envelope coordinates; returns (n, 2).

    Draws 1D thermal (x, v) Gaussians and maps them via
    A = sqrt(x^2 + (v / (w_d/2))^2), phi = atan2(-v / (w_d/2), x), the
    t = 0 reading of the envelope ansatz.
    """
    sigma_v = math.sqrt(constants.boltzmann * temperature / constants.electron_mass)
    x = rng.normal(0.0, sigma_v / omega_x, size=n)
    v = rng.normal(0.0, sigma_v, size=n)
    half_wd = 0.5 * omega_d
    a = np.hypot(x, v / half_wd)
    phi = np.arctan2(-v / half_wd, x)
    return np.column_stack([a, phi])


def portrait_grid(params: SlowFlowParams, epsilon: float,
                  extent: float = 120e-6, n: int = 1001):
    """Cartesian slow-flow field on the phase-portrait grid.

    Returns (axis, X, Y, dX/dt, dY/dt) with X = A cos(phi), Y = A sin(phi)
    sampled on an n x n grid over [-extent, extent]^2, for streamline plots.
    """
    axis = np.linspace(-extent, extent, n)
    x, y = np.meshgrid(axis, axis)
    dx, dy = cartesian_field(x, y, params, epsilon)
    return axis, x, y, dx, dy
