from dataclasses import replace

import numpy as np
import pytest

from donor_readout.dynamics import FIRDrive, NIRDrive, RateParams, Shelf
from donor_readout.levels import LevelScheme, material_preset


@pytest.fixture
def gaas():
    return LevelScheme.from_material(material_preset("GaAs"))


def random_rate_params(rng: np.random.Generator, shelf: bool | None = None) -> RateParams:
    """A valid model with every channel possibly active and moderate stiffness.

    Rates stay within about two decades of each other so that a stable
    fixed step reaches equilibrium in a reasonable number of steps.
    """
    tau = rng.uniform(0.5, 2.0)
    nir = NIRDrive(
        intensity=rng.uniform(0.0, 3.0),
        detuning=rng.uniform(-2e-3, 2e-3),
        linewidth=rng.uniform(5e-4, 2e-3),
        sat_intensity=1.0,
    )
    fir = FIRDrive(
        intensity=rng.uniform(0.0, 30.0),
        photon_energy=rng.choice([4.3, 4.425, 5.0, 6.74]),
        sat_intensity_ionize=rng.uniform(1.0, 20.0),
        sat_intensity_bound=rng.uniform(0.5, 5.0),
        overlap=rng.uniform(0.1, 1.0),
    )
    use_shelf = rng.random() < 0.3 if shelf is None else shelf
    return RateParams(
        tau_d0x=tau,
        t1=rng.uniform(50.0, 350.0),
        p_auger=rng.uniform(0.0, 0.2),
        capture_rate=rng.uniform(0.02, 0.2),
        nir=nir,
        fir=fir,
        capture_to_excited=bool(rng.random() < 0.3),
        shelf=Shelf(rng.uniform(0.0, 1.0), rng.uniform(20.0, 300.0)) if use_shelf else None,
    )


def random_ionizing_model(rng: np.random.Generator) -> RateParams:
    """NIR off, ionizing THz photon, random rates."""
    rp = random_rate_params(rng, shelf=False)
    return replace(
        rp,
        nir=replace(rp.nir, intensity=0.0),
        fir=replace(rp.fir, photon_energy=rng.uniform(5.9, 12.0), intensity=0.0),
    )
