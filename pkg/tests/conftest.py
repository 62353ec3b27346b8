"""Shared fixtures: the EASY phantom is expensive enough to build once."""

import dataclasses

import pytest

import sonoselect as ss


@pytest.fixture(scope="session")
def easy_config():
    return ss.default_config(ss.PhantomProfile.EASY)


@pytest.fixture(scope="session")
def easy_phantom(easy_config):
    return ss.generate(easy_config)


@pytest.fixture(scope="session")
def easy_dataset(easy_phantom):
    trials, _ = easy_phantom
    return ss.build_dataset(trials, ss.ValleyParams(n_motions=5))


@pytest.fixture(scope="session")
def easy_fc(easy_dataset):
    return ss.score_matrix(easy_dataset, ss.ScoreMethod.FC)


@pytest.fixture(scope="session")
def easy_mi(easy_dataset):
    return ss.score_matrix(easy_dataset, ss.ScoreMethod.MI)


@pytest.fixture(scope="session")
def tiny_phantom_config():
    """Small fast phantom for unit tests that only need shape, not scale."""
    regions = (
        (ss.ActiveRegion(4, 10),),
        (ss.ActiveRegion(12, 18),),
        (ss.ActiveRegion(20, 26),),
    )
    return ss.PhantomConfig(
        n_classes=3,
        trials_per_class=3,
        m=32,
        d=32,
        frames_per_motion=5,
        rest_frames=4,
        active_regions=regions,
        additive_noise_sigma=0.005,
        speckle_sigma=0.02,
        seed=7,
    )


@pytest.fixture(scope="session")
def tiny_phantom(tiny_phantom_config):
    return ss.generate(tiny_phantom_config)


@pytest.fixture(scope="session")
def tiny_noiseless_phantom(tiny_phantom_config):
    cfg = dataclasses.replace(
        tiny_phantom_config, additive_noise_sigma=0.0, speckle_sigma=0.0
    )
    return ss.generate(cfg)
