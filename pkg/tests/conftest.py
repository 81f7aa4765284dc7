import math

import numpy as np
import pytest

from depotopt import (
    CanonicalScale,
    CircularOrbit,
    DepotPlacement,
    Instance,
    PropulsionParams,
    Satellite,
)

GPS_SCALE = CanonicalScale(du_km=26560.0)
GPS_PROP = PropulsionParams(isp_launch=457.0, isp_depot=320.0, isp_servicer=1790.0)
R0_DU = 7000.0 / 26560.0


def make_instance(satellites, n_d=1, n_v=1, depots=None, m_max_l=12950.0,
                  m_dry_s=500.0, m_dry_d=1500.0, r0=R0_DU, r_min=R0_DU):
    """Small-instance builder with GPS-era defaults."""
    return Instance(
        satellites=tuple(satellites),
        n_d=n_d,
        n_v=n_v,
        m_dry_s=m_dry_s,
        m_dry_d=m_dry_d,
        m_max_l=m_max_l,
        r0=r0,
        r_min=r_min,
        prop=GPS_PROP,
        scale=GPS_SCALE,
        depots_initial=tuple(depots) if depots is not None else None,
    )


def sat(a=1.0, i_deg=55.0, raan_deg=0.0, payload=100.0):
    return Satellite(orbit(a, i_deg, raan_deg), payload)


def orbit(a=1.0, i_deg=55.0, raan_deg=0.0):
    return CircularOrbit(a, math.radians(i_deg), math.radians(raan_deg))


def random_orbit(rng: np.random.Generator, a_range=(0.3, 1.6)) -> CircularOrbit:
    return CircularOrbit(
        rng.uniform(*a_range),
        rng.uniform(0.0, math.pi),
        rng.uniform(0.0, 2.0 * math.pi),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def placement_of(*orbits) -> DepotPlacement:
    return DepotPlacement(tuple(orbits))
