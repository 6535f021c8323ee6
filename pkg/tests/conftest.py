import numpy as np
import pytest

from kftune.kalman import GaussianBelief
from kftune.lti_model import ContinuousModel
from kftune.tuner import DesignParameter, DesignSpec, Scenario


@pytest.fixture
def robot_model() -> ContinuousModel:
    """1D robot on a track: double-integrator kinematics, position measurements."""
    return ContinuousModel(
        A=[[0.0, 1.0], [0.0, 0.0]],
        G=[[0.0], [1.0]],
        Gamma=[[0.0], [1.0]],
        H=[[1.0, 0.0]],
        V=[[1.0]],
        W=[[0.1]],
        dt=0.1,
    )


@pytest.fixture
def robot_scenario(robot_model) -> Scenario:
    return Scenario(model=robot_model, init=GaussianBelief(mean=[0.0, 0.0], cov=np.eye(2)))


@pytest.fixture
def case1_spec() -> DesignSpec:
    return DesignSpec(
        parameters=(DesignParameter("V", "process_noise_intensity", 0.0, 10.0),),
        cost_kind="nees",
    )


@pytest.fixture
def case2_spec() -> DesignSpec:
    return DesignSpec(
        parameters=(
            DesignParameter("V", "process_noise_intensity", 0.01, 10.0),
            DesignParameter("R", "measurement_noise_variance", 0.01, 10.0),
        ),
        cost_kind="nees",
    )
