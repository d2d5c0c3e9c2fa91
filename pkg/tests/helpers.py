"""Shared comparisons between circuits and the pattern oracle."""

from __future__ import annotations

import numpy as np

from mbqc_circuits.simulator import circuit_unitary, pattern_map, phase_fit


def pattern_fit(c, g, angles):
    """``(scale deviation, max error)`` of ``pattern_map ≈ 2^{-|O^C|/2} e^{iθ} U_c``.

    The phase comes from the largest entry; the error is measured against the
    exact expected scale, not the fitted one.
    """
    target = pattern_map(g, angles)
    got = circuit_unitary(c).reorder(target.out_labels, target.in_labels)
    expected = 2.0 ** (-len(g.non_outputs) / 2)
    theta, s, _ = phase_fit(target, got)
    err = float(np.max(np.abs(target.matrix - expected * np.exp(1j * theta) * got.matrix)))
    return abs(s - expected), err


def unitary_fit(a, b):
    """Max error of ``U_a ≈ e^{iθ} U_b`` with unit scale enforced."""
    ua = circuit_unitary(a)
    ub = circuit_unitary(b).reorder(ua.out_labels, ua.in_labels)
    theta, s, _ = phase_fit(ua, ub)
    return float(np.max(np.abs(ua.matrix - np.exp(1j * theta) * ub.matrix)))


ACCEPTANCE_LINES: list[str] = []


class criterion:
    """Record one PASS/FAIL line for an acceptance criterion.

    Any exception inside the block, including a failed assertion, marks it FAIL.
    """

    def __init__(self, number: int, title: str) -> None:
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self) -> criterion:
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        verdict = "PASS" if exc_type is None else "FAIL"
        line = f"{verdict} criterion {self.number}: {self.title}"
        if self.detail:
            line += f" ({self.detail})"
        if exc is not None:
            line += f" [{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}]"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return False
