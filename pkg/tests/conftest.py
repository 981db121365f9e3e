import numpy as np
import pytest

from trusim import GunParams, PhantomParams, ProbeRig, ProstateModel, SectorScheme12, generate_phantom


@pytest.fixture(scope="session")
def default_model() -> ProstateModel:
    return ProstateModel(center=(40.0, 40.0, 40.0), semi_axes=(22.0, 18.0, 25.0))


@pytest.fixture(scope="session")
def scheme() -> SectorScheme12:
    return SectorScheme12()


@pytest.fixture(scope="session")
def rig() -> ProbeRig:
    return ProbeRig()


@pytest.fixture(scope="session")
def gun() -> GunParams:
    return GunParams()


@pytest.fixture(scope="session")
def small_params() -> PhantomParams:
    """Fast 80^3 phantom at 0.5 mm for slice tests."""
    return PhantomParams(
        volume_extent=(40.0, 40.0, 40.0),
        spacing=0.5,
        gland_semi_axes=(10.0, 9.0, 11.0),
        gland_center=(20.0, 20.0, 20.0),
    )


@pytest.fixture(scope="session")
def small_phantom(small_params):
    return generate_phantom(small_params, seed=7)


@pytest.fixture(scope="session")
def sphere_params() -> PhantomParams:
    """Speckle-free sphere gland, no rectal band: rotation symmetric scene."""
    return PhantomParams(
        volume_extent=(80.0, 80.0, 80.0),
        spacing=0.5,
        gland_semi_axes=(20.0, 20.0, 20.0),
        gland_center=(40.0, 40.0, 40.0),
        speckle_amplitude=0.0,
        rectal_wall_depth=0.0,
    )


@pytest.fixture(scope="session")
def sphere_phantom(sphere_params):
    return generate_phantom(sphere_params, seed=0)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240810)
