import math

import pytest

from qpa_readout.params import DeviceParams

TWO_PI = 2.0 * math.pi

# T2 chosen so that 1/T2* = 0.23 us^-1 together with T1 = 4.2 us
T1 = 4.2e-6
T2 = 9.0128755365e-6


@pytest.fixture(scope="session")
def device_fig2() -> DeviceParams:
    return DeviceParams(kappa=TWO_PI * 25.4e6, chi=TWO_PI * 1.9e6,
                        omega_qpa=TWO_PI * 6.740e9, omega_q=TWO_PI * 4.271e9,
                        t1=T1, t2=T2)


@pytest.fixture(scope="session")
def device_fig3() -> DeviceParams:
    return DeviceParams(kappa=TWO_PI * 25.7e6, chi=TWO_PI * 1.7e6,
                        omega_qpa=TWO_PI * 6.740e9, omega_q=TWO_PI * 4.274e9,
                        t1=T1, t2=T2)


@pytest.fixture(scope="session")
def device_fig4() -> DeviceParams:
    return DeviceParams(kappa=TWO_PI * 28.6e6, chi=TWO_PI * 2.0e6,
                        omega_qpa=TWO_PI * 6.700e9, omega_q=TWO_PI * 4.271e9,
                        t1=T1, t2=T2)
