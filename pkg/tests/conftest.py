from collections import OrderedDict

import numpy as np
import pytest

from lingdist import io
from lingdist.genetic import GenealogyGraph
from lingdist.typology import FeatureMatrix

from synth import block_features

LANGS = ["ita", "spa", "deu", "nld"]

# ---------------------------------------------------------------- data fixture


@pytest.fixture
def dataset(tmp_path):
    """Small on-disk dataset covering all three modalities for four languages."""
    speakers = [
        ("ita", "rome", 41.9, 12.5, 500),
        ("ita", "milan", 45.5, 9.2, 300),
        ("spa", "madrid", 40.4, -3.7, 800),
        ("spa", "mexico", 19.4, -99.1, 1200),
        ("deu", "berlin", 52.5, 13.4, 900),
        ("nld", "amsterdam", 52.4, 4.9, 400),
        ("nld", "paramaribo", 5.8, -55.2, 10),
    ]
    io.save_speakers(tmp_path / "speakers.csv", speakers)

    tree = GenealogyGraph.from_edges([
        ("ie", "romance"), ("ie", "germanic"),
        ("romance", "ita"), ("romance", "spa"),
        ("germanic", "deu"), ("germanic", "nld"),
    ])
    io.save_tree(tmp_path / "tree.csv", tree)

    m, _ = block_features([3, 2], 120, 0.1, 0.2, np.random.default_rng(0))
    m = FeatureMatrix(LANGS + m.languages[len(LANGS):], m.features, m.values)
    io.save_features(tmp_path / "features.csv", m)
    return tmp_path


# ---------------------------------------------------------------- acceptance summary

_criteria: "OrderedDict[str, list]" = OrderedDict()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or report.outcome != "passed":
        cid, title = marker.args
        entry = _criteria.setdefault(cid, [title, True, 0])
        entry[1] = entry[1] and report.outcome == "passed"
        if report.when == "call":
            entry[2] += 1


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_criteria, key=lambda c: int(c.lstrip("AC"))):
        title, ok, n = _criteria[cid]
        terminalreporter.write_line(f"{cid:>4} {'PASS' if ok else 'FAIL'}  {title} ({n} checks)")
