import importlib
import itertools
import math

import numpy as np
import pytest

from sslfuse import kernels
from sslfuse.kernels import _fallback

from oracles import ctc_brute_force_nll, levenshtein

try:
    from sslfuse.kernels import _native
except ImportError:  # extension not built
    _native = None

needs_native = pytest.mark.skipif(_native is None, reason="compiled kernels not built")


def test_backend_selection(monkeypatch):
    monkeypatch.setenv("SSLFUSE_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
        assert mod.ctc_forward_backward is _fallback.ctc_forward_backward
    finally:
        monkeypatch.delenv("SSLFUSE_PURE_PYTHON")
        importlib.reload(kernels)


@pytest.mark.parametrize("impl", [_fallback, pytest.param(_native, marks=needs_native)],
                         ids=["python", "native"])
def test_ctc_backends_match_enumeration(impl):
    r = np.random.default_rng(0)
    for t, labels in [(2, [1]), (4, [1, 1]), (5, [1, 2, 1]), (6, [2, 2, 2])]:
        x = r.standard_normal((t, 3))
        lp = x - np.log(np.exp(x).sum(axis=1, keepdims=True))
        nll, grad = impl.ctc_forward_backward(lp, np.array(labels, dtype=np.int64), 0)
        assert nll == pytest.approx(ctc_brute_force_nll(lp, labels), rel=1e-10)
        # grad wrt log-probs is minus the state occupancy; each frame sums to -1
        assert np.allclose(grad.sum(axis=1), -1.0)


@pytest.mark.parametrize("impl", [_fallback, pytest.param(_native, marks=needs_native)],
                         ids=["python", "native"])
def test_ctc_infeasible(impl):
    nll, grad = impl.ctc_forward_backward(np.log(np.full((2, 3), 1 / 3)), np.array([1, 1], dtype=np.int64), 0)
    assert math.isinf(nll) and not grad.any()


@needs_native
def test_native_equals_fallback():
    r = np.random.default_rng(1)
    for _ in range(50):
        t = int(r.integers(1, 12))
        labels = r.integers(1, 5, size=int(r.integers(0, 5)))
        x = r.standard_normal((t, 5))
        lp = x - np.log(np.exp(x).sum(axis=1, keepdims=True))
        a = _native.ctc_forward_backward(lp, labels, 0)
        b = _fallback.ctc_forward_backward(lp, labels, 0)
        if math.isinf(b[0]):
            assert math.isinf(a[0])
        else:
            assert a[0] == pytest.approx(b[0], rel=1e-12)
            assert np.allclose(a[1], b[1], atol=1e-12)


@pytest.mark.parametrize("impl", [_fallback, pytest.param(_native, marks=needs_native)],
                         ids=["python", "native"])
def test_edit_table_distance(impl):
    r = np.random.default_rng(2)
    for _ in range(40):
        ref = r.integers(0, 3, size=int(r.integers(0, 7)))
        hyp = r.integers(0, 3, size=int(r.integers(0, 7)))
        table = impl.edit_table(ref.astype(np.int64), hyp.astype(np.int64))
        assert table[-1, -1] == levenshtein(list(ref), list(hyp))


def test_benchmark_script_runs(capsys):
    import importlib.util
    from pathlib import Path
    path = Path(__file__).parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    mod.main(["--repeat", "1", "--number", "1"])
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("kernel\t") and any("\tpython\t" in l for l in out)
