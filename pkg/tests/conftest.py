import numpy as np
import pytest

from cotcmc import (ConverterParams, FilterSpec, InterferenceSpec, PhaseMode,
                    SineComponent)


@pytest.fixture
def worked_cp() -> ConverterParams:
    """Hand-checked operating point used throughout the unit tests."""
    return ConverterParams(m1=1.0, m2=1.0, t_off=1.0, t_on_min=0.5,
                           i_max=4.0, i_c=2.0)


@pytest.fixture
def worked_fs() -> FilterSpec:
    return FilterSpec(tau=1.0)


@pytest.fixture
def no_interference() -> InterferenceSpec:
    return InterferenceSpec()


@pytest.fixture
def locked_sine() -> InterferenceSpec:
    return InterferenceSpec(
        components=(SineComponent(amp=0.05, omega=3.0, phase=0.7),),
        phase_mode=PhaseMode.LOCKED)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260826)
