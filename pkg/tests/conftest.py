"""Shared fixtures: small instances of the three benchmark models, built once per session."""

import os
import sys
from fractions import Fraction

import pytest

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(PROJECT_ROOT, "scripts"))
sys.path.insert(0, PROJECT_ROOT)

from contact_tlamg.meshgen import ContactModelSpec, ModelId, generate_model  # noqa: E402
from contact_tlamg.saddle import build_saddle_system  # noqa: E402

MODELS = ("model1", "model2", "model3")


def build_model_system(model, resolution: int = 2, mismatch=Fraction(3, 2), **kwargs):
    spec = ContactModelSpec(model_id=ModelId.parse(model), resolution=resolution,
                            mismatch_ratio=Fraction(mismatch), **kwargs)
    return build_saddle_system(generate_model(spec))


@pytest.fixture(scope="session")
def small_systems():
    return {m: build_model_system(m) for m in MODELS}


@pytest.fixture(scope="session", params=MODELS)
def small_system(request, small_systems):
    return small_systems[request.param]


@pytest.fixture(scope="session")
def model3_r4():
    return build_model_system("model3", resolution=4)
