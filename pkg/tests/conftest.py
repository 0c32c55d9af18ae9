"""Shared pytest wiring: the acceptance criterion scoreboard.

test_acceptance.py records one verdict per numbered criterion; the summary
hook prints one line each after the run so the verdicts are visible in
plain pytest output without digging through individual test names.
"""

CRITERION_DESCRIPTIONS = {
    1: "unit nodal magnetization through the 1000-step baseline, in budget",
    2: "energy ledger holds for the baseline and the applied-field sweep",
    3: "uniform cube meshes are weakly acute at every tested resolution",
    4: "nodal normalization never increases the Dirichlet energy",
    5: "per-step nodal movement stays below the step size times velocity",
    6: "sparse step solution matches the dense first-principles step",
    7: "solved velocity is tangent to the magnetization at every node",
    8: "explicit variant breaks the ledger where the implicit one holds",
    9: "ledger left side never rises and the vortex relaxes",
    10: "edge interpolation round-trip and constant reproduction",
}

RESULTS = {}


def record_criterion(num, passed):
    RESULTS[num] = bool(passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERION_DESCRIPTIONS):
        if num in RESULTS:
            status = "PASS" if RESULTS[num] else "FAIL"
        else:
            status = "NOT RUN"
        terminalreporter.write_line(
            "criterion %2d [%s] %s" % (num, status, CRITERION_DESCRIPTIONS[num]))
