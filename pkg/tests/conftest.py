import pytest

from psiproj import projections as pr
from psiproj.models import build_model


class Cache:
    """Models and projection ladders shared across the session (they are expensive at K=3)."""

    def __init__(self):
        self.models = {}
        self.ladders = {}

    def model(self, name, depth=3, **kw):
        key = (name, depth, tuple(sorted(kw.items())))
        if key not in self.models:
            self.models[key] = build_model(name, depth=depth, **kw)
        return self.models[key]

    def projections(self, name, depth=3, variant="commuting-simplified", **kw):
        key = (name, depth, variant, tuple(sorted(kw.items())))
        if key not in self.ladders:
            self.ladders[key] = pr.build_projections(self.model(name, depth, **kw), depth, variant)
        return self.ladders[key]


@pytest.fixture(scope="session")
def cache():
    return Cache()


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
