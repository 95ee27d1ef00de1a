import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from sslfuse.corpus import TOY_SSL_DIM, gen_toy_corpus
from sslfuse.model import ModelConfig


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    gen_toy_corpus(0, out, n_train=8, n_dev=4)
    return out


def tiny_config(mode="ca", seed=0, **kw):
    base = dict(n_mels=80, d=8, heads=2, enc_layers=1, dec_layers=1, ffn_expansion=2, kernel=3,
                subsample_channels=2, mode=mode, ssl_sources=["synthetic-a"], ssl_dims=[TOY_SSL_DIM], seed=seed)
    base.update(kw)
    return ModelConfig(**base)


ACCEPTANCE_LINES: list[str] = []


def record(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
