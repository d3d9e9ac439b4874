import numpy as np
import pytest

from ruleadvisor.data import CATEGORICAL, NUMERIC, Dataset, FeatureSpec, Instance


def make_dataset(rows, labels, kinds=None, tags=None):
    """Small in-memory dataset from a list of feature dicts."""
    names = list(rows[0])
    kinds = kinds or {n: (CATEGORICAL if isinstance(rows[0][n], str) else NUMERIC) for n in names}
    schema = tuple(FeatureSpec(n, kinds[n]) for n in names)
    insts = tuple(Instance(dict(r), int(y)) for r, y in zip(rows, labels))
    return Dataset(insts, schema, "label", tuple(tags) if tags else None)


class StubOutcome:
    """Outcome model returning fixed probabilities per row."""

    def __init__(self, p):
        self.p = np.asarray(p, dtype=float)

    def predict_proba(self, dataset, rows=None):
        rows = np.arange(len(dataset)) if rows is None else np.asarray(rows)
        if len(self.p) == 1:
            return np.full(len(rows), self.p[0])
        return self.p[rows]


@pytest.fixture
def heart_prepared():
    from ruleadvisor.pipeline import PipelineConfig, prepare

    return prepare(PipelineConfig(dataset="heart"))


# one line per acceptance criterion, printed after the run whatever the capture mode
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
