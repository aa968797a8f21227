"""Shared test plumbing: a one-line verdict per acceptance criterion.

The acceptance tests in test_acceptance.py are named test_criterion_NN_*;
after the run we print a compact PASS/FAIL table so the criteria can be
read off without scanning the full pytest output.
"""

CRITERIA = {
    1: "solver matches dense pseudoinverse oracle",
    2: "triangle and parallel laws hold on random networks",
    3: "series, parallel, and complete-graph exact values",
    4: "conditioned tree shapes match enumeration; deadline respected",
    5: "extinction recursion exact and Monte Carlo consistent",
    6: "walk second moment, convolution, and local limit",
    7: "trace resistance invariants and monotonicity",
    8: "conditioned subtree sizes dominate unconditioned",
    9: "intersection detector equals brute force",
    10: "intersection moments: flat mean, growing second moment",
    11: "resistance ratio flat at d=8, decreasing at d=4",
    12: "exponent fit recovers known slopes",
    13: "identical config and seed give identical bytes",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = {}
    for key, verdict in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(key, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid or "::test_criterion_" not in nodeid:
                continue
            tail = nodeid.split("::test_criterion_", 1)[1]
            try:
                num = int(tail.split("_", 1)[0])
            except ValueError:
                continue
            # a test that both failed and errored stays FAIL
            if outcomes.get(num) != "FAIL":
                outcomes[num] = verdict
    if not outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(outcomes):
        label = CRITERIA.get(num, "")
        terminalreporter.write_line(f"{outcomes[num]} criterion {num:2d}: {label}")
