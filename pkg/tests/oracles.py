"""Independent reference computations for the fuzzy controller.

Nothing here imports the package's inference code: membership functions
are rebuilt from peak lists with ``np.interp`` and the aggregate is sampled
on a uniform grid ten times finer than the controller's default, then
integrated with the trapezoid rule.
"""

import numpy as np

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

LABELS5 = ["NB", "NS", "ZE", "PS", "PB"]
LABELS7 = ["NB", "NM", "NS", "ZE", "PS", "PM", "PB"]

E_U, DE_U, DH_U = (-0.2, 0.1), (-0.2, 0.2), (-1.5, 3.0)
E_P = [-0.2, -0.1, 0.0, 0.05, 0.1]
DE_P = [-0.2, -0.1, 0.0, 0.1, 0.2]
DH_P = [-1.5, -1.0, -0.5, 0.0, 0.5, 1.75, 3.0]

TABLE = """
NB: PB PB PB PM PS
NS: PM PS PS ZE ZE
ZE: PS ZE ZE ZE NS
PS: ZE ZE NS NS NM
PB: NS NS NM NB NB
"""
RULES = {}
for line in TABLE.strip().splitlines():
    e_lab, row = line.split(":")
    for de_lab, out in zip(LABELS5, row.split()):
        RULES[(e_lab, de_lab)] = out

FINE_POINTS = 10 * (4501 - 1) + 1


def memberships(peaks, x):
    """Shoulder-ended triangular partition evaluated at x (array)."""
    out = []
    for i in range(len(peaks)):
        ys = np.zeros(len(peaks))
        ys[i] = 1.0
        # np.interp holds the end values outside the peak span: shoulders
        out.append(np.interp(x, peaks, ys))
    return out


def centroid_of(mu, x):
    return _trapezoid(x * mu, x) / _trapezoid(mu, x)


def aggregate(e, de, points=FINE_POINTS):
    e = min(max(e, E_U[0]), E_U[1])
    de = min(max(de, DE_U[0]), DE_U[1])
    me = {lab: float(memberships(E_P, np.array([e]))[i][0]) for i, lab in enumerate(LABELS5)}
    md = {lab: float(memberships(DE_P, np.array([de]))[i][0]) for i, lab in enumerate(LABELS5)}
    x = np.linspace(DH_U[0], DH_U[1], points)
    out_sets = dict(zip(LABELS7, memberships(DH_P, x)))
    agg = np.zeros_like(x)
    for (a, b), c in RULES.items():
        w = min(me[a], md[b])
        if w > 0:
            agg = np.maximum(agg, np.minimum(w, out_sets[c]))
    return x, agg


def centroid(e, de, points=FINE_POINTS):
    x, agg = aggregate(e, de, points)
    return centroid_of(agg, x)


def set_centroid(label, points=FINE_POINTS):
    x = np.linspace(DH_U[0], DH_U[1], points)
    mu = dict(zip(LABELS7, memberships(DH_P, x)))[label]
    return centroid_of(mu, x)
