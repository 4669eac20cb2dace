import pytest

from evmv import _kernels


@pytest.fixture(params=_kernels.available_backends())
def kernel_backend(request):
    """Run a test once per available kernel backend."""
    previous = _kernels.use_backend(request.param)
    yield request.param
    _kernels.use_backend(previous)
