"""Shared scenes and cached long FDTD runs."""

import pytest
from scipy.constants import c as C0

from lensbeam import sweep
from lensbeam.scene import AntennaScene, LensSpec, default_paper_scene, make_ports


@pytest.fixture(scope="session")
def paper_scene():
    return default_paper_scene()


@pytest.fixture(scope="session")
def small_scene():
    """2-wavelength lens with three feeds; quick to simulate."""
    f0 = 28e9
    lam = C0 / f0
    r0 = 2.0 * lam
    return AntennaScene(f0=f0, lens=LensSpec((0.0, 0.0), r0, 2.1, 0.0), plate_spacing_h=0.54 * lam,
                        ports=make_ports(3, 20.0, 0.4 * r0), domain_padding=2.5 * lam)


@pytest.fixture(scope="session")
def campaign20(paper_scene):
    return sweep.scan_campaign(paper_scene, sweep.EngineSettings(resolution=20))


@pytest.fixture(scope="session")
def campaign40(paper_scene):
    return sweep.scan_campaign(paper_scene, sweep.EngineSettings(resolution=40))


@pytest.fixture(scope="session")
def point_source40(paper_scene):
    return sweep.simulate_port(paper_scene, 5, sweep.EngineSettings(resolution=40, point_source=True))


@pytest.fixture(scope="session")
def analytic_point(paper_scene):
    return sweep.simulate_port(paper_scene, 5, sweep.EngineSettings(engine="analytic",
                                                                    point_source=True))


@pytest.fixture(scope="session")
def feed_study(paper_scene):
    return sweep.feed_distance_optimize(paper_scene, 0.2, 0.6, 0.04)
