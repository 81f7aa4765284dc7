"""Analytic astrodynamics kernel for circular orbits.

Plane tilt angles, low-thrust (Edelbaum) transfer costs, Hohmann
launch/deployment costs, the effective-mass-to-LEO (EMLEO) conversion
factor, and closed-form partial derivatives of all of the above.

Everything works in canonical units: mu = 1 DU^3/TU^2, radii in DU,
angles in radians.  Exhaust velocities stay in m/s and are bridged
through :class:`CanonicalScale` wherever a delta-v meets g0*Isp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi

# Plane changes beyond this angle (radians) cost the full V1 + V2.
TILT_CAP = 2.0

# Gradient guards.  The closed forms are singular at coincident planes
# (1/sqrt(1 - cos^2 dtheta) diverges) and at zero-cost transfers
# (1/dv diverges); both are measure-zero points where a zero
# subgradient keeps an optimizer stationary.
SIN_TILT_GUARD = 1e-9
DV_GUARD = 1e-9


@dataclass(frozen=True)
class CircularOrbit:
    """A circular orbit: semimajor axis (DU), inclination and RAAN (rad).

    RAAN is normalized into [0, 2*pi) on construction; inclination must
    lie in [0, pi].
    """

    a: float
    i: float
    raan: float

    def __post_init__(self) -> None:
        if not self.a > 0.0:
            raise ValueError(f"semimajor axis must be positive, got {self.a}")
        if not -1e-12 <= self.i <= math.pi + 1e-12:
            raise ValueError(f"inclination must lie in [0, pi], got {self.i}")
        object.__setattr__(self, "i", min(max(self.i, 0.0), math.pi))
        object.__setattr__(self, "raan", self.raan % TWO_PI)

    def plane_normal(self) -> tuple[float, float, float]:
        """Unit normal of the orbital plane in the inertial frame."""
        si = math.sin(self.i)
        return (
            math.sin(self.raan) * si,
            -math.cos(self.raan) * si,
            math.cos(self.i),
        )


@dataclass(frozen=True)
class CanonicalScale:
    """Unit system: du_km kilometers per DU, mu = 1 DU^3/TU^2 exactly."""

    du_km: float
    mu_km3s2: float = 398600.4418

    def __post_init__(self) -> None:
        if self.du_km <= 0.0 or self.mu_km3s2 <= 0.0:
            raise ValueError("du_km and mu_km3s2 must be positive")

    @property
    def v_ms(self) -> float:
        """Meters per second per canonical velocity unit (DU/TU)."""
        return math.sqrt(self.mu_km3s2 / self.du_km) * 1000.0

    def to_du(self, km: float) -> float:
        return km / self.du_km

    def to_km(self, du: float) -> float:
        return du * self.du_km


@dataclass(frozen=True)
class PropulsionParams:
    """Specific impulses (s) of launch vehicle, depot and servicer."""

    isp_launch: float
    isp_depot: float
    isp_servicer: float
    g0: float = 9.81

    def __post_init__(self) -> None:
        for name in ("isp_launch", "isp_depot", "isp_servicer", "g0"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def ve_launch(self) -> float:
        return self.g0 * self.isp_launch

    @property
    def ve_depot(self) -> float:
        return self.g0 * self.isp_depot

    @property
    def ve_servicer(self) -> float:
        return self.g0 * self.isp_servicer


@dataclass(frozen=True)
class OrbitGradient:
    """Partial derivatives with respect to one orbit's (a, i, raan)."""

    d_da: float
    d_di: float
    d_draan: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.d_da, self.d_di, self.d_draan)


ZERO_GRADIENT = OrbitGradient(0.0, 0.0, 0.0)


def _cos_tilt(o1: CircularOrbit, o2: CircularOrbit) -> float:
    c = (
        math.sin(o1.i) * math.sin(o2.i) * math.cos(o1.raan - o2.raan)
        + math.cos(o1.i) * math.cos(o2.i)
    )
    # Clamp against rounding only; valid inputs cannot exceed [-1, 1].
    return min(1.0, max(-1.0, c))


def tilt_angle(o1: CircularOrbit, o2: CircularOrbit) -> float:
    """Angle between the two orbital planes' normal vectors, in [0, pi]."""
    return math.acos(_cos_tilt(o1, o2))


def tilt_angle_grad(depot: CircularOrbit, target: CircularOrbit) -> OrbitGradient:
    """Derivative of the tilt angle with respect to the depot's elements.

    Zero beyond the tilt cap (the transfer cost no longer depends on the
    angle there) and at the coincident/antipodal singularities.
    """
    cos_t = _cos_tilt(depot, target)
    tilt = math.acos(cos_t)
    if tilt > TILT_CAP:
        return ZERO_GRADIENT
    denom = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    if denom < SIN_TILT_GUARD:
        return ZERO_GRADIENT
    d_raan = depot.raan - target.raan
    d_di = -(
        math.cos(depot.i) * math.sin(target.i) * math.cos(d_raan)
        - math.sin(depot.i) * math.cos(target.i)
    ) / denom
    d_draan = math.sin(depot.i) * math.sin(target.i) * math.sin(d_raan) / denom
    return OrbitGradient(0.0, d_di, d_draan)


def circular_speed(a: float) -> float:
    """Circular-orbit speed sqrt(mu/a) with mu = 1, in DU/TU."""
    return 1.0 / math.sqrt(a)


def edelbaum_dv(o1: CircularOrbit, o2: CircularOrbit) -> float:
    """Low-thrust transfer cost between circular orbits, in DU/TU.

    Edelbaum's analytic circle-to-inclined-circle solution: the plane
    change enters through cos(pi/2 * min(tilt, cap)); past the cap the
    cost saturates at V1 + V2.
    """
    v1 = circular_speed(o1.a)
    v2 = circular_speed(o2.a)
    tilt = tilt_angle(o1, o2)
    if tilt >= TILT_CAP:
        return v1 + v2
    s = v1 * v1 - 2.0 * v1 * v2 * math.cos(0.5 * math.pi * tilt) + v2 * v2
    return math.sqrt(max(0.0, s))


def edelbaum_dv_grad(depot: CircularOrbit, target: CircularOrbit) -> OrbitGradient:
    """Derivative of the transfer cost with respect to the depot's elements.

    Zero below the dv guard (coincident orbits).  Past the tilt cap only
    the radius term survives, matching the capped cost V1 + V2.
    """
    dv = edelbaum_dv(depot, target)
    if dv < DV_GUARD:
        return ZERO_GRADIENT
    tilt = tilt_angle(depot, target)
    ang = 0.5 * math.pi * min(tilt, TILT_CAP)
    a_d, a_t = depot.a, target.a
    d_da = (-1.0 / (a_d * a_d) + math.cos(ang) / math.sqrt(a_d ** 3 * a_t)) / (2.0 * dv)
    tg = tilt_angle_grad(depot, target)
    coef = 0.5 * math.pi * math.sin(ang) / (dv * math.sqrt(a_d * a_t))
    return OrbitGradient(d_da, coef * tg.d_di, coef * tg.d_draan)


def launch_deploy_dv(a: float, r0: float) -> tuple[float, float]:
    """Hohmann two-burn split from the virtual LEO of radius r0 up to a.

    The first burn belongs to the launch vehicle, the second to the
    depot.  Both in DU/TU; both zero when a == r0.
    """
    if r0 <= 0.0:
        raise ValueError(f"r0 must be positive, got {r0}")
    if a < r0:
        raise ValueError(f"depot radius {a} below virtual LEO radius {r0}")
    if a == r0:
        return (0.0, 0.0)
    dv_launch = math.sqrt(2.0 / r0 - 2.0 / (a + r0)) - math.sqrt(1.0 / r0)
    dv_depot = math.sqrt(1.0 / a) - math.sqrt(2.0 / a - 2.0 / (a + r0))
    return (max(0.0, dv_launch), max(0.0, dv_depot))


def emleo_factor(
    a: float, r0: float, prop: PropulsionParams, scale: CanonicalScale
) -> float:
    """EMLEO conversion factor: launch-mass multiplier for altitude a.

    Product of the two rocket-equation mass ratios for the launch burn
    and the deployment burn.  Equals 1 exactly at a == r0 and grows
    with a over the model's operating envelope.
    """
    dv_launch, dv_depot = launch_deploy_dv(a, r0)
    v = scale.v_ms
    return math.exp(dv_launch * v / prop.ve_launch) * math.exp(
        dv_depot * v / prop.ve_depot
    )


def emleo_factor_grad(
    a: float, r0: float, prop: PropulsionParams, scale: CanonicalScale
) -> float:
    """d(emleo_factor)/da; derivatives in i and raan are identically zero."""
    a = max(a, r0 + 1e-12)
    phi = emleo_factor(a, r0, prop, scale)
    apr = a + r0
    root_depot = math.sqrt(2.0 / a - 2.0 / apr)
    root_launch = math.sqrt(2.0 / r0 - 2.0 / apr)
    ddv_depot = -0.5 / a ** 1.5 - (-1.0 / (a * a) + 1.0 / (apr * apr)) / root_depot
    ddv_launch = 1.0 / (apr * apr * root_launch)
    v = scale.v_ms
    return phi * (ddv_depot * v / prop.ve_depot + ddv_launch * v / prop.ve_launch)


def mass_ratio(dv: float, ve_ms: float, scale: CanonicalScale) -> float:
    """Rocket-equation mass ratio exp(dv / ve) for a canonical dv."""
    return math.exp(dv * scale.v_ms / ve_ms)
