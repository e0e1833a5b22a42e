import os
import subprocess
import sys

import pytest

from lagrange_swarm import _pykernel, kernels


def _probe(code, **env):
    return subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                          env=dict(os.environ, **env))


def test_fallback_when_extension_missing():
    code = ("import sys; sys.modules['lagrange_swarm._ckernel'] = None\n"
            "from lagrange_swarm import kernels\n"
            "print(kernels.BACKEND, kernels.COMPILED_AVAILABLE)")
    res = _probe(code)
    assert res.returncode == 0, res.stderr
    assert res.stdout.split() == ["python", "False"]


def test_env_forces_backend():
    res = _probe("from lagrange_swarm import kernels; print(kernels.BACKEND)", LAGRANGE_SWARM_BACKEND="python")
    assert res.stdout.strip() == "python"
    code = ("import sys; sys.modules['lagrange_swarm._ckernel'] = None\n"
            "from lagrange_swarm import kernels")
    res = _probe(code, LAGRANGE_SWARM_BACKEND="compiled")
    assert res.returncode != 0 and "not built" in res.stderr


def test_get_rejects_unknown_name():
    with pytest.raises(ValueError):
        kernels.get("gpu")
    assert kernels.get("python") is _pykernel

