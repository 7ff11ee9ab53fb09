import numpy as np
import pytest

from gazedwell.geometry import BoundingBox, Hyperlink, PageLayout
from gazedwell.segmentation import ALLOWED_PAIRS, GazeSample, Label, SegModelParams
from gazedwell.traceio import load_default_params

F, S, O = Label.FIXATION, Label.SACCADE, Label.OUTLIER


@pytest.fixture(scope="session")
def fixture_bundle():
    return load_default_params()


def make_layout(boxes, screen=(1280.0, 1024.0)):
    links = [Hyperlink(i + 1, BoundingBox(*box)) for i, box in enumerate(boxes)]
    return PageLayout(links, screen[0], screen[1])


def column_layout(rng, n_links, screen=(1280.0, 1024.0)):
    boxes = []
    top = 120.0
    for _ in range(n_links):
        h = float(rng.uniform(16, 24))
        boxes.append((float(rng.uniform(100, 350)), top, float(rng.uniform(80, 260)), h))
        top += h + float(rng.uniform(8, 26))
    return make_layout(boxes, screen)


def random_seg_params(rng):
    trans = np.zeros((len(ALLOWED_PAIRS), 3))
    for p, (a, b) in enumerate(ALLOWED_PAIRS):
        allowed = [int(c) for c in (F, S, O) if (b, c) in set(ALLOWED_PAIRS)]
        w = rng.random(len(allowed)) + 0.05
        trans[p, allowed] = w / w.sum()
    return SegModelParams(
        transition=trans,
        var_f=rng.uniform(2.0, 60.0, 2),
        var_s=rng.uniform(200.0, 8000.0, 2),
        var_o=rng.uniform(1000.0, 60000.0, 2),
    )


def sample_seg_trace(params, T, rng, start=None):
    """Draw (labels, samples) from the label chain and its emissions."""
    pair = ALLOWED_PAIRS[int(rng.integers(0, len(ALLOWED_PAIRS)))]
    labels = [pair[0], pair[1]]
    start = np.asarray(start if start is not None else rng.uniform(200, 800, 2), dtype=float)
    pts = [start, start + rng.normal(0.0, 2.0, 2)]
    for _ in range(2, T):
        a, b = labels[-2], labels[-1]
        row = params.transition[ALLOWED_PAIRS.index((a, b))]
        c = Label(int(rng.choice(3, p=row)))
        g2, g1 = pts[-2], pts[-1]
        if b == F and a != O:
            mu = (g2 + g1) / 2.0
        elif b == O:
            mu = g2
        else:
            mu = g1
        if c == S:
            var = params.var_s
        elif c == O:
            var = params.var_o
        elif b == F and a != O:
            var = 1.5 * params.var_f
        else:
            var = 2.0 * params.var_f
        pts.append(mu + rng.normal(0.0, 1.0, 2) * np.sqrt(var))
        labels.append(c)
    trace = [GazeSample(t, float(p[0]), float(p[1])) for t, p in enumerate(pts)]
    return labels, trace
