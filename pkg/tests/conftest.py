import math
import sys


def adaptive_simpson(fn, a, b, tol=1e-14, depth=60):
    """Plain recursive adaptive Simpson; independent of scipy."""

    def simpson(fa, fm, fb, lo, hi):
        return (hi - lo) * (fa + 4.0 * fm + fb) / 6.0

    def rec(lo, hi, fa, fm, fb, whole, tol, depth):
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = fn(lm), fn(rm)
        left = simpson(fa, flm, fm, lo, mid)
        right = simpson(fm, frm, fb, mid, hi)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (rec(lo, mid, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(mid, hi, fm, frm, fb, right, 0.5 * tol, depth - 1))

    fa, fb, fm = fn(a), fn(b), fn(0.5 * (a + b))
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, depth)


def pdf(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
