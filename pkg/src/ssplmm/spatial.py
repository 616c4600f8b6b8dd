"""One-dimensional finite-volume semi-discretizations.

Each problem maps a cell-average array of shape ``(n_components, n_cells)``
to its time derivative and reports the largest characteristic speed, from
which the forward-Euler permissible step ``h_FE = cfl_FE * dx / a_max``
follows. Supported physics: linear advection with a time-dependent speed,
inviscid Burgers, and the Euler equations of an ideal gas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, NonPhysicalState
from .formulas import UNBOUNDED

__all__ = [
    "Grid1D",
    "Advection",
    "Burgers",
    "Euler1D",
    "SemiDiscreteProblem",
    "minmod",
    "mc_slopes",
    "mc_reconstruct",
    "weno5_reconstruct",
    "advection_speed",
    "advection_displacement",
    "advection_problem",
    "burgers_problem",
    "blastwave_problem",
    "make_problem",
    "PROBLEMS",
]

WENO_EPS = 1e-6
GHOSTS = {"mc": 2, "weno5": 3}


@dataclass(frozen=True)
class Grid1D:
    n_cells: int
    x_lo: float = 0.0
    x_hi: float = 1.0
    ghost: int = 2

    def __post_init__(self):
        if self.n_cells < 1 or not self.x_hi > self.x_lo:
            raise DomainError("grid needs n_cells >= 1 and x_hi > x_lo")

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_lo + (np.arange(self.n_cells) + 0.5) * self.dx


# ---------------------------------------------------------------------------
# reconstruction


def minmod(a, b):
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def mc_slopes(dl, dr):
    """Monotonized-central slope from the left and right differences."""
    mm = minmod(dl, dr)
    return np.sign(mm) * np.minimum(np.abs(0.5 * (dl + dr)), 2.0 * np.abs(mm))


def mc_reconstruct(window):
    """Limited slope of the middle cell of a three-cell window.

    ``minmod(2(u_i - u_{i-1}), 2(u_{i+1} - u_i), (u_{i+1} - u_{i-1})/2)``,
    applied componentwise along the first axis of ``window``.
    """
    w = np.asarray(window, dtype=float)
    if w.shape[0] != 3:
        raise DomainError("MC reconstruction needs a window of 3 cells")
    return mc_slopes(w[1] - w[0], w[2] - w[1])


def _weno_edge(a, b, c, d, e):
    """Value at the right edge of cell ``c`` from cells ``a..e`` (Jiang-Shu)."""
    q0 = (2.0 * a - 7.0 * b + 11.0 * c) / 6.0
    q1 = (-b + 5.0 * c + 2.0 * d) / 6.0
    q2 = (2.0 * c + 5.0 * d - e) / 6.0
    s0 = 13.0 / 12.0 * (a - 2.0 * b + c) ** 2 + 0.25 * (a - 4.0 * b + 3.0 * c) ** 2
    s1 = 13.0 / 12.0 * (b - 2.0 * c + d) ** 2 + 0.25 * (b - d) ** 2
    s2 = 13.0 / 12.0 * (c - 2.0 * d + e) ** 2 + 0.25 * (3.0 * c - 4.0 * d + e) ** 2
    w0 = 0.1 / (WENO_EPS + s0) ** 2
    w1 = 0.6 / (WENO_EPS + s1) ** 2
    w2 = 0.3 / (WENO_EPS + s2) ** 2
    return (w0 * q0 + w1 * q1 + w2 * q2) / (w0 + w1 + w2)


def weno5_reconstruct(window):
    """Fifth-order WENO values at the left and right edges of the middle cell.

    ``window`` holds five cell averages (or five stacked arrays); returns
    ``(u_{i-1/2}^+, u_{i+1/2}^-)``.
    """
    w = np.asarray(window, dtype=float)
    if w.shape[0] != 5:
        raise DomainError("WENO5 reconstruction needs a window of 5 cells")
    left = _weno_edge(w[4], w[3], w[2], w[1], w[0])
    right = _weno_edge(w[0], w[1], w[2], w[3], w[4])
    return left, right


def _interfaces_mc(q, g, n):
    dl = q[:, 1:-1] - q[:, :-2]
    dr = q[:, 2:] - q[:, 1:-1]
    half = 0.5 * mc_slopes(dl, dr)  # for padded cells 1..N-2
    # interfaces between padded cells p and p+1, p = g-1 .. g+n-1
    uL = q[:, g - 1 : g + n] + half[:, g - 2 : g + n - 1]
    uR = q[:, g : g + n + 1] - half[:, g - 1 : g + n]
    return uL, uR


def _interfaces_weno(q, g, n, sides="LR"):
    """Edge values on both sides of each interface; a side left out of
    ``sides`` is returned as ``None``."""

    def s(off):
        return q[:, g - 1 + off : g + n + off]

    uL = _weno_edge(s(-2), s(-1), s(0), s(1), s(2)) if "L" in sides else None
    uR = _weno_edge(s(3), s(2), s(1), s(0), s(-1)) if "R" in sides else None
    return uL, uR


# ---------------------------------------------------------------------------
# physics


def advection_speed(t):
    return 2.0 + 1.5 * math.sin(2.0 * math.pi * t)


def advection_displacement(t):
    """``int_0^t a(s) ds`` for the default advection speed."""
    return 2.0 * t - 3.0 / (4.0 * math.pi) * (math.cos(2.0 * math.pi * t) - 1.0)


@dataclass(frozen=True)
class Advection:
    speed: Callable[[float], float] = advection_speed
    n_components: int = 1
    reflect_sign: tuple = (-1.0,)

    def max_speed(self, t, u):
        return abs(self.speed(t))

    def upwind_side(self, t):
        """Which interface value the flux uses: ``"L"`` or ``"R"``."""
        return "L" if self.speed(t) >= 0.0 else "R"

    def flux(self, t, uL, uR):
        a = self.speed(t)
        return a * (uL if a >= 0.0 else uR)


@dataclass(frozen=True)
class Burgers:
    n_components: int = 1
    reflect_sign: tuple = (-1.0,)

    def max_speed(self, t, u):
        return float(np.max(np.abs(u)))

    def flux(self, t, uL, uR):
        fL = 0.5 * uL * uL
        fR = 0.5 * uR * uR
        rare = np.where(uL > 0.0, fL, np.where(uR < 0.0, fR, 0.0))
        return np.where(uL <= uR, rare, np.maximum(fL, fR))


@dataclass(frozen=True)
class Euler1D:
    """Ideal-gas Euler equations in conserved variables ``(rho, rho u, E)``."""

    gamma: float = 1.4
    n_components: int = 3
    reflect_sign: tuple = (1.0, -1.0, 1.0)

    def primitive(self, U):
        rho = U[0]
        vel = U[1] / rho
        p = (self.gamma - 1.0) * (U[2] - 0.5 * rho * vel * vel)
        return rho, vel, p

    def conserved(self, rho, vel, p):
        return np.stack([rho, rho * vel, p / (self.gamma - 1.0) + 0.5 * rho * vel * vel])

    def sound_speed(self, rho, p):
        return np.sqrt(self.gamma * p / rho)

    def check(self, U, where="state"):
        rho, _, p = self.primitive(U)
        bad = ~((rho > 0.0) & (p > 0.0))
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise NonPhysicalState(
                f"non-physical {where} at index {i}: rho={rho[i]:.6g}, p={p[i]:.6g}", location=i
            )

    def max_speed(self, t, U):
        self.check(U)
        rho, vel, p = self.primitive(U)
        return float(np.max(np.abs(vel) + self.sound_speed(rho, p)))

    def physical_flux(self, rho, vel, p, U):
        return np.stack([U[1], U[1] * vel + p, vel * (U[2] + p)])

    def flux(self, t, UL, UR):
        """HLL flux with Davis wave-speed estimates."""
        rL, vL, pL = self.primitive(UL)
        rR, vR, pR = self.primitive(UR)
        cL = self.sound_speed(rL, pL)
        cR = self.sound_speed(rR, pR)
        sL = np.minimum(vL - cL, vR - cR)
        sR = np.maximum(vL + cL, vR + cR)
        FL = self.physical_flux(rL, vL, pL, UL)
        FR = self.physical_flux(rR, vR, pR, UR)
        denom = np.where(sR > sL, sR - sL, 1.0)
        Fm = (sR * FL - sL * FR + sL * sR * (UR - UL)) / denom
        return np.where(sL >= 0.0, FL, np.where(sR <= 0.0, FR, Fm))

    def eigenvectors(self, UL, UR):
        """Roe-averaged right and left eigenvector matrices, shape ``(n, 3, 3)``."""
        rL, vL, pL = self.primitive(UL)
        rR, vR, pR = self.primitive(UR)
        sl, sr = np.sqrt(rL), np.sqrt(rR)
        HL = (UL[2] + pL) / rL
        HR = (UR[2] + pR) / rR
        v = (sl * vL + sr * vR) / (sl + sr)
        H = (sl * HL + sr * HR) / (sl + sr)
        g1 = self.gamma - 1.0
        c = np.sqrt(np.maximum(g1 * (H - 0.5 * v * v), 1e-300))
        one = np.ones_like(v)
        R = np.empty(v.shape + (3, 3))
        R[..., 0, :] = np.stack([one, one, one], axis=-1)
        R[..., 1, :] = np.stack([v - c, v, v + c], axis=-1)
        R[..., 2, :] = np.stack([H - v * c, 0.5 * v * v, H + v * c], axis=-1)
        b1 = g1 / (c * c)
        b2 = 0.5 * b1 * v * v
        L = np.empty_like(R)
        L[..., 0, :] = np.stack([0.5 * (b2 + v / c), -0.5 * (b1 * v + 1.0 / c), 0.5 * b1], axis=-1)
        L[..., 1, :] = np.stack([1.0 - b2, b1 * v, -b1], axis=-1)
        L[..., 2, :] = np.stack([0.5 * (b2 - v / c), -0.5 * (b1 * v - 1.0 / c), 0.5 * b1], axis=-1)
        return R, L


# ---------------------------------------------------------------------------
# problem


_BOUNDARIES = ("periodic", "reflecting", "outflow")


@dataclass
class SemiDiscreteProblem:
    """Method-of-lines right-hand side with wave-speed reporting.

    ``boundary`` is a single kind or a ``(left, right)`` pair of
    ``"periodic"``, ``"reflecting"`` or ``"outflow"``.
    """

    grid: Grid1D
    physics: object
    reconstruction: str = "mc"
    boundary: object = "periodic"
    cfl_fe: float = 0.5
    name: str = "custom"
    initial: Callable | None = field(default=None, repr=False)
    exact: Callable | None = field(default=None, repr=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.reconstruction not in GHOSTS:
            raise DomainError(f"unknown reconstruction {self.reconstruction!r}")
        sides = (self.boundary, self.boundary) if isinstance(self.boundary, str) else tuple(self.boundary)
        if len(sides) != 2 or any(s not in _BOUNDARIES for s in sides):
            raise DomainError(f"bad boundary specification {self.boundary!r}")
        if (sides[0] == "periodic") != (sides[1] == "periodic"):
            raise DomainError("periodic boundaries must be used on both sides")
        self.sides = sides
        g = GHOSTS[self.reconstruction]
        if g > self.grid.n_cells:
            raise DomainError("grid too small for the reconstruction stencil")
        self.ghost = g
        self._sign = np.asarray(self.physics.reflect_sign, dtype=float)[:, None]
        if self.reconstruction == "weno5":
            self.metadata.setdefault("weno_eps", WENO_EPS)
            self.metadata.setdefault("weno_weights", "jiang-shu")

    @property
    def dx(self) -> float:
        return self.grid.dx

    @property
    def periodic(self) -> bool:
        return self.sides[0] == "periodic"

    def initial_state(self) -> np.ndarray:
        if self.initial is None:
            raise DomainError("problem has no initial condition")
        u = np.asarray(self.initial(self.grid.centers), dtype=float)
        return u.reshape(self.physics.n_components, self.grid.n_cells).copy()

    def exact_solution(self, t) -> np.ndarray | None:
        if self.exact is None:
            return None
        u = np.asarray(self.exact(self.grid.centers, t), dtype=float)
        return u.reshape(self.physics.n_components, self.grid.n_cells)

    def pad(self, u):
        """Append ``ghost`` boundary cells on each side."""
        g = self.ghost
        if self.periodic:
            return np.concatenate([u[:, -g:], u, u[:, :g]], axis=1)
        left, right = self.sides
        if left == "reflecting":
            lo = u[:, g - 1 :: -1] * self._sign
        else:
            lo = np.repeat(u[:, :1], g, axis=1)
        if right == "reflecting":
            hi = u[:, : -g - 1 : -1] * self._sign
        else:
            hi = np.repeat(u[:, -1:], g, axis=1)
        return np.concatenate([lo, u, hi], axis=1)

    def _interfaces(self, q, t=0.0):
        g, n = self.ghost, self.grid.n_cells
        phys = self.physics
        if isinstance(phys, Euler1D):
            if self.reconstruction == "mc":
                rho, vel, p = phys.primitive(q)
                W = np.stack([rho, vel, p])
                WL, WR = _interfaces_mc(W, g, n)
                return phys.conserved(*WL), phys.conserved(*WR)
            return self._characteristic_weno(q, g, n)
        if self.reconstruction == "mc":
            return _interfaces_mc(q, g, n)
        upwind = getattr(phys, "upwind_side", None)
        return _interfaces_weno(q, g, n, upwind(t) if upwind else "LR")

    def _characteristic_weno(self, q, g, n):
        phys = self.physics
        R, L = phys.eigenvectors(q[:, g - 1 : g + n], q[:, g : g + n + 1])

        def proj(off):
            return np.einsum("nij,jn->in", L, q[:, g - 1 + off : g + n + off])

        w = {off: proj(off) for off in range(-2, 4)}
        cL = _weno_edge(w[-2], w[-1], w[0], w[1], w[2])
        cR = _weno_edge(w[3], w[2], w[1], w[0], w[-1])
        UL = np.einsum("nij,jn->in", R, cL)
        UR = np.einsum("nij,jn->in", R, cR)
        phys.check(UL, "reconstructed left state")
        phys.check(UR, "reconstructed right state")
        return UL, UR

    def rhs(self, t, u):
        """Return ``(du/dt, a_max)``."""
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise NonPhysicalState("state contains non-finite values")
        a_max = self.physics.max_speed(t, u)
        q = self.pad(u)
        uL, uR = self._interfaces(q, t)
        F = self.physics.flux(t, uL, uR)
        du = (F[:, :-1] - F[:, 1:]) / self.grid.dx
        return du, a_max

    def fe_step(self, a_max):
        if a_max == 0.0:
            return UNBOUNDED
        return self.cfl_fe * self.grid.dx / a_max

    def h_fe(self, t, u):
        return self.fe_step(self.physics.max_speed(t, np.asarray(u, dtype=float)))

    def evaluate(self, t, u):
        """``(f(t, u), h_FE(u))`` in one pass; this is what the integrators call."""
        du, a = self.rhs(t, u)
        return du, self.fe_step(a)

    def total_variation(self, u) -> float:
        """Total variation; characteristic-wise for the Euler equations."""
        from .diagnostics import total_variation

        u = np.asarray(u, dtype=float)
        if isinstance(self.physics, Euler1D):
            if self.periodic:
                a, b = u, np.roll(u, -1, axis=1)
            else:
                a, b = u[:, :-1], u[:, 1:]
            _, L = self.physics.eigenvectors(a, b)
            return float(np.sum(np.abs(np.einsum("nij,jn->in", L, b - a))))
        return float(sum(total_variation(row, periodic=self.periodic) for row in u))




# ---------------------------------------------------------------------------
# named problems


def advection_problem(n_cells=128, reconstruction="mc", cfl_fe=0.5):
    """``u_t + (2 + 1.5 sin 2 pi t) u_x = 0`` on the periodic unit interval."""

    def init(x):
        return np.sin(2.0 * np.pi * x)

    def exact(x, t):
        return np.sin(2.0 * np.pi * (x - advection_displacement(t)))

    return SemiDiscreteProblem(
        Grid1D(n_cells, 0.0, 1.0, GHOSTS[reconstruction]),
        Advection(),
        reconstruction,
        "periodic",
        cfl_fe,
        name="advection",
        initial=init,
        exact=exact,
    )


def burgers_problem(n_cells=256, reconstruction="mc", cfl_fe=0.5, initial=None):
    """Periodic inviscid Burgers; default data ``1/2 + sin 2 pi x``."""
    if initial is None:

        def initial(x):
            return 0.5 + np.sin(2.0 * np.pi * x)

    return SemiDiscreteProblem(
        Grid1D(n_cells, 0.0, 1.0, GHOSTS[reconstruction]),
        Burgers(),
        reconstruction,
        "periodic",
        cfl_fe,
        name="burgers",
        initial=initial,
    )


def blastwave_problem(n_cells=512, reconstruction="mc", cfl_fe=0.5, gamma=1.4):
    """Interacting blast waves between reflecting walls on ``[0, 1]``."""
    phys = Euler1D(gamma)

    def init(x):
        rho = np.ones_like(x)
        vel = np.zeros_like(x)
        p = np.where(x < 0.1, 1000.0, np.where(x < 0.9, 0.01, 100.0))
        return phys.conserved(rho, vel, p)

    return SemiDiscreteProblem(
        Grid1D(n_cells, 0.0, 1.0, GHOSTS[reconstruction]),
        phys,
        reconstruction,
        "reflecting",
        cfl_fe,
        name="blastwave",
        initial=init,
    )


PROBLEMS = {
    "advection": advection_problem,
    "burgers": burgers_problem,
    "blastwave": blastwave_problem,
}


def make_problem(name, n_cells, reconstruction="mc", cfl_fe=0.5):
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise DomainError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(n_cells, reconstruction=reconstruction, cfl_fe=cfl_fe)
