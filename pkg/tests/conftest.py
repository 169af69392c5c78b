"""Per-criterion summary for the acceptance suite.

Tests marked ``@pytest.mark.acceptance("C<n>", "title")`` are grouped by
criterion; the terminal summary prints one PASS/FAIL line per criterion,
followed by any ``detail`` properties the tests recorded.
"""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_results: dict[str, dict] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    cid, title = marker.args
    entry = _results.setdefault(cid, {"title": title, "ok": True, "ran": False, "details": []})
    item.user_properties.append(("criterion", cid))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    cid = props.get("criterion")
    if cid is None or cid not in _results:
        return
    entry = _results[cid]
    if report.when == "call" or report.failed:
        entry["ran"] = entry["ran"] or report.when == "call"
        entry["ok"] = entry["ok"] and not report.failed
    if report.when == "call":
        entry["details"].extend(v for k, v in report.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_results, key=lambda c: int(c[1:])):
        entry = _results[cid]
        status = "PASS" if entry["ok"] and entry["ran"] else "FAIL"
        terminalreporter.write_line(f"{cid} {status}  {entry['title']}")
        for line in entry["details"]:
            terminalreporter.write_line(f"      {line}")
