"""File formats: line-delimited trial traces and flat key-value model params.

Trace files are JSON lines.  The first line is a header carrying the format
version, the sample period and the duration unit; each following line is one
trial: the page layout, the gaze samples before "Select" was activated, the
samples after the gaze left the button, the true target link and free-form
metadata.

Parameter files are flat `key = value` text, one number per line, covering
the segmentation model and/or the intent model (including its duration-unit
tag).  The packaged `table2-3.params` fixture ships the default parameter
set used by the CLI and the gateway.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .engine import ButtonRegion, Command
from .geometry import BoundingBox, Hyperlink, PageLayout
from .intent import IntentModelParams
from .segmentation import ALLOWED_PAIRS, GazeSample, PAIR_INDEX, Label, SegModelParams
from .units import TS_MS

TRACE_FORMAT_VERSION = 1
PARAMS_FORMAT_VERSION = 1

_LABEL_CODE = {Label.FIXATION: "f", Label.SACCADE: "s", Label.OUTLIER: "o"}
_CODE_LABEL = {v: k for k, v in _LABEL_CODE.items()}


class TraceFormatError(ValueError):
    """Malformed trace file; message carries the line number and field."""


@dataclass
class TrialRecord:
    layout: PageLayout
    pre_select: list[GazeSample]
    post_select: list[GazeSample]
    true_target: int
    meta: dict
    buttons: Optional[list[ButtonRegion]] = None

    def __post_init__(self):
        if not self.pre_select:
            raise ValueError("pre_select must be non-empty")
        if not 1 <= self.true_target <= self.layout.n_links:
            raise ValueError(f"true_target {self.true_target} not a link of the layout")
        _check_contiguous(self.pre_select, "pre_select")
        _check_contiguous(self.post_select, "post_select")
        if self.post_select and self.post_select[0].t <= self.pre_select[-1].t:
            raise ValueError("post_select must start after pre_select ends")


def _check_contiguous(samples: Sequence[GazeSample], name: str):
    for prev, cur in zip(samples, samples[1:]):
        if cur.t != prev.t + 1:
            raise ValueError(f"{name}: sample index gap {prev.t} -> {cur.t}")


# ---------------------------------------------------------------------------
# Layout <-> plain objects (shared with the wire protocol)
# ---------------------------------------------------------------------------

def layout_to_obj(layout: PageLayout, buttons: Optional[Sequence[ButtonRegion]] = None) -> dict:
    obj = {
        "screen": [layout.screen_width, layout.screen_height],
        "links": [
            {"id": l.id, "left": l.bbox.left, "top": l.bbox.top,
             "width": l.bbox.width, "height": l.bbox.height,
             **({"label": l.label} if l.label is not None else {})}
            for l in layout.links
        ],
    }
    if buttons:
        obj["buttons"] = [
            {"command": b.command.value, "left": b.bbox.left, "top": b.bbox.top,
             "width": b.bbox.width, "height": b.bbox.height}
            for b in buttons
        ]
    return obj


def layout_from_obj(obj: dict) -> tuple[PageLayout, Optional[list[ButtonRegion]]]:
    try:
        screen_w, screen_h = obj["screen"]
        links = [
            Hyperlink(int(l["id"]),
                      BoundingBox(float(l["left"]), float(l["top"]),
                                  float(l["width"]), float(l["height"])),
                      l.get("label"))
            for l in obj["links"]
        ]
    except KeyError as exc:
        raise TraceFormatError(f"layout is missing field {exc.args[0]!r}") from None
    layout = PageLayout(links, float(screen_w), float(screen_h))
    buttons = None
    if "buttons" in obj:
        buttons = [
            ButtonRegion(Command(b["command"]),
                         BoundingBox(float(b["left"]), float(b["top"]),
                                     float(b["width"]), float(b["height"])))
            for b in obj["buttons"]
        ]
    return layout, buttons


def _samples_to_obj(samples: Sequence[GazeSample]) -> list:
    return [[s.t, s.x, s.y] for s in samples]


def _samples_from_obj(obj, field: str) -> list[GazeSample]:
    samples = []
    for row in obj:
        if len(row) != 3:
            raise TraceFormatError(f"{field}: each sample must be [t, x, y]")
        samples.append(GazeSample(int(row[0]), float(row[1]), float(row[2])))
    return samples


# ---------------------------------------------------------------------------
# Trial files
# ---------------------------------------------------------------------------

def save_trials(trials: Sequence[TrialRecord], path: Union[str, Path],
                duration_unit: str = "samples"):
    path = Path(path)
    with path.open("w") as fh:
        header = {"version": TRACE_FORMAT_VERSION, "ts_ms": round(TS_MS, 4),
                  "duration_unit": duration_unit}
        fh.write(json.dumps(header) + "\n")
        for trial in trials:
            obj = {
                "layout": layout_to_obj(trial.layout, trial.buttons),
                "pre_select": _samples_to_obj(trial.pre_select),
                "post_select": _samples_to_obj(trial.post_select),
                "true_target": trial.true_target,
                "meta": trial.meta,
            }
            fh.write(json.dumps(obj) + "\n")


def load_trials(path: Union[str, Path]) -> list[TrialRecord]:
    path = Path(path)
    trials: list[TrialRecord] = []
    with path.open() as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise TraceFormatError("empty trace file (missing header)")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"line 1: header is not valid JSON ({exc})") from None
    if header.get("version") != TRACE_FORMAT_VERSION:
        raise TraceFormatError(f"line 1: unsupported trace format version {header.get('version')!r}")
    if abs(float(header.get("ts_ms", TS_MS)) - TS_MS) > 0.01:
        raise TraceFormatError(f"line 1: unsupported sample period {header.get('ts_ms')!r} ms")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"line {lineno}: not valid JSON ({exc})") from None
        for field in ("layout", "pre_select", "post_select", "true_target"):
            if field not in obj:
                raise TraceFormatError(f"line {lineno}: missing field {field!r}")
        try:
            layout, buttons = layout_from_obj(obj["layout"])
            trial = TrialRecord(
                layout=layout,
                pre_select=_samples_from_obj(obj["pre_select"], "pre_select"),
                post_select=_samples_from_obj(obj["post_select"], "post_select"),
                true_target=int(obj["true_target"]),
                meta=obj.get("meta", {}),
                buttons=buttons,
            )
        except (TraceFormatError, ValueError) as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from None
        trials.append(trial)
    return trials


# ---------------------------------------------------------------------------
# Parameter files
# ---------------------------------------------------------------------------

@dataclass
class ParamsBundle:
    seg: Optional[SegModelParams] = None
    intent: Optional[IntentModelParams] = None


def _pair_key(pair) -> str:
    return _LABEL_CODE[pair[0]] + _LABEL_CODE[pair[1]]


def params_to_text(bundle: ParamsBundle) -> str:
    lines = [f"format.version = {PARAMS_FORMAT_VERSION}"]
    if bundle.seg is not None:
        seg = bundle.seg
        lines.append("")
        lines.append("# segmentation model: transition rows over allowed label triples,")
        lines.append("# then diagonal emission variances (px^2)")
        for p, pair in enumerate(ALLOWED_PAIRS):
            for c in (Label.FIXATION, Label.SACCADE, Label.OUTLIER):
                if (pair[1], c) in PAIR_INDEX:
                    lines.append(f"seg.trans.{_pair_key(pair)}.{_LABEL_CODE[c]} = {float(seg.transition[p, int(c)])!r}")
        for name, var in (("f", seg.var_f), ("s", seg.var_s), ("o", seg.var_o)):
            lines.append(f"seg.var_{name}.x = {float(var[0])!r}")
            lines.append(f"seg.var_{name}.y = {float(var[1])!r}")
    if bundle.intent is not None:
        it = bundle.intent
        lines.append("")
        lines.append("# intent model: behavior transition rows (columns 1,2,3,ts),")
        lines.append("# location and duration emission parameters, initial distribution")
        for i in range(3):
            for j, col in enumerate(("1", "2", "3", "ts")):
                lines.append(f"intent.behavior_trans.{i + 1}.{col} = {float(it.behavior_transition[i, j])!r}")
        lines.append(f"intent.p_s = {float(it.p_s)!r}")
        for name in ("beta_x", "beta_y", "sigma_x", "sigma_y"):
            arr = getattr(it, name)
            for k in (1, 2):
                lines.append(f"intent.{name}.{k} = {float(arr[k - 1])!r}")
        for name in ("mu_d", "sigma_d", "pi"):
            arr = getattr(it, name)
            for k in (1, 2, 3):
                lines.append(f"intent.{name}.{k} = {float(arr[k - 1])!r}")
        lines.append(f"intent.duration_unit = {it.duration_unit}")
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> ParamsBundle:
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"params line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        kv[key] = value

    bundle = ParamsBundle()
    if any(k.startswith("seg.") for k in kv):
        trans = np.zeros((len(ALLOWED_PAIRS), 3))
        for p, pair in enumerate(ALLOWED_PAIRS):
            for c in (Label.FIXATION, Label.SACCADE, Label.OUTLIER):
                if (pair[1], c) in PAIR_INDEX:
                    trans[p, int(c)] = float(kv[f"seg.trans.{_pair_key(pair)}.{_LABEL_CODE[c]}"])
        bundle.seg = SegModelParams(
            transition=trans,
            var_f=np.array([float(kv["seg.var_f.x"]), float(kv["seg.var_f.y"])]),
            var_s=np.array([float(kv["seg.var_s.x"]), float(kv["seg.var_s.y"])]),
            var_o=np.array([float(kv["seg.var_o.x"]), float(kv["seg.var_o.y"])]),
        )
    if any(k.startswith("intent.") for k in kv):
        bt = np.array([[float(kv[f"intent.behavior_trans.{i}.{col}"])
                        for col in ("1", "2", "3", "ts")] for i in (1, 2, 3)])
        bundle.intent = IntentModelParams(
            behavior_transition=bt,
            p_s=float(kv["intent.p_s"]),
            beta_x=np.array([float(kv["intent.beta_x.1"]), float(kv["intent.beta_x.2"])]),
            beta_y=np.array([float(kv["intent.beta_y.1"]), float(kv["intent.beta_y.2"])]),
            sigma_x=np.array([float(kv["intent.sigma_x.1"]), float(kv["intent.sigma_x.2"])]),
            sigma_y=np.array([float(kv["intent.sigma_y.1"]), float(kv["intent.sigma_y.2"])]),
            mu_d=np.array([float(kv[f"intent.mu_d.{k}"]) for k in (1, 2, 3)]),
            sigma_d=np.array([float(kv[f"intent.sigma_d.{k}"]) for k in (1, 2, 3)]),
            pi=np.array([float(kv[f"intent.pi.{k}"]) for k in (1, 2, 3)]),
            duration_unit=kv.get("intent.duration_unit", "samples"),
        )
    return bundle


def save_params(bundle: ParamsBundle, path: Union[str, Path]):
    Path(path).write_text(params_to_text(bundle))


def load_params(path: Union[str, Path]) -> ParamsBundle:
    return params_from_text(Path(path).read_text())


DEFAULT_PARAMS_RESOURCE = "table2-3.params"


def load_default_params() -> ParamsBundle:
    """The packaged default parameter set (behavior tables plus segmentation
    defaults)."""
    text = resources.files("gazedwell").joinpath("data").joinpath(DEFAULT_PARAMS_RESOURCE).read_text()
    return params_from_text(text)
