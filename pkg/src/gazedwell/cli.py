"""Command line front end.

Subcommands mirror the pipeline: `segment` and `infer` inspect recorded
trials, `synth` builds synthetic corpora, `simulate` and `grid` evaluate
dwell policies, `train-seg`/`train-intent` fit model parameters, and `serve`
runs the session gateway (REST + WebSocket, optionally hosting the demo UI).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .intent import train_intent
from .policy import parse_policy
from .segmentation import GazeSample, extract_fixations, train_segmentation, viterbi_labels
from .simulate import (GridSpec, SynthConfig, grid_search, infer_posterior, pareto_frontier,
                       results_to_csv, simulate_policy, synth_trials)
from .traceio import (ParamsBundle, load_default_params, load_params, load_trials, save_params,
                      save_trials)


def _load_bundle(path: str | None) -> ParamsBundle:
    if path is None:
        return load_default_params()
    bundle = load_params(path)
    defaults = load_default_params()
    if bundle.seg is None:
        bundle.seg = defaults.seg
    if bundle.intent is None:
        bundle.intent = defaults.intent
    return bundle


def _trial_subset(trials, index):
    if index is None:
        return list(enumerate(trials))
    if not 0 <= index < len(trials):
        raise SystemExit(f"trial index {index} out of range (file has {len(trials)})")
    return [(index, trials[index])]


def cmd_segment(args) -> int:
    bundle = _load_bundle(args.params)
    trials = load_trials(args.trials)
    for i, trial in _trial_subset(trials, args.trial):
        trace = [GazeSample(j, s.x, s.y) for j, s in enumerate(trial.pre_select)]
        labels = viterbi_labels(trace, bundle.seg)
        fixations = extract_fixations(trace, labels)
        print(json.dumps({
            "trial": i,
            "n_samples": len(trace),
            "labels": "".join(l.name[0].lower() for l in labels),
            "fixations": [{"x": round(f.x, 2), "y": round(f.y, 2),
                           "duration_ms": round(f.duration_ms, 2),
                           "start": f.start_index, "end": f.end_index}
                          for f in fixations],
        }))
    return 0


def cmd_infer(args) -> int:
    bundle = _load_bundle(args.params)
    trials = load_trials(args.trials)
    for i, trial in _trial_subset(trials, args.trial):
        posterior = infer_posterior(trial, bundle.seg, bundle.intent)
        print(json.dumps({
            "trial": i,
            "true_target": trial.true_target,
            "argmax_link": int(np.argmax(posterior)) + 1,
            "posterior": [round(float(p), 6) for p in posterior],
        }))
    return 0


def cmd_synth(args) -> int:
    bundle = _load_bundle(args.params)
    config = SynthConfig(n_trials=args.n, seed=args.seed,
                         n_links=(args.min_links, args.max_links),
                         fixation_jitter_px=args.jitter,
                         post_jitter_px=args.post_jitter,
                         distractor_rate=args.distractor_rate)
    trials = synth_trials(config, bundle.intent)
    save_trials(trials, args.out)
    print(f"wrote {len(trials)} trials to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    bundle = _load_bundle(args.params)
    trials = load_trials(args.trials)
    policy = parse_policy(args.policy)
    result = simulate_policy(trials, policy, bundle.seg, bundle.intent, args.quantize)
    print(json.dumps({
        "policy": policy.as_literal(),
        "error_rate": round(result.error_rate, 6),
        "error_ci": round(result.error_ci, 6),
        "mean_rt_ms": round(result.mean_response_time_ms, 4),
        "rt_ci": round(result.rt_ci, 4),
        "n": result.n_trials,
        "timeouts": result.n_timeouts,
    }))
    return 0


def cmd_grid(args) -> int:
    bundle = _load_bundle(args.params)
    trials = load_trials(args.trials)
    spec = GridSpec.coarse() if args.coarse else GridSpec()
    results = grid_search(trials, bundle.seg, bundle.intent, spec=spec,
                          quantize=args.quantize, jobs=args.jobs)
    csv = results_to_csv(results)
    Path(args.out).write_text(csv)
    frontier = pareto_frontier(results)
    print(f"wrote {len(results)} policies to {args.out}; "
          f"{len(frontier)} on the error/response-time frontier")
    if args.frontier_out:
        Path(args.frontier_out).write_text(results_to_csv(frontier))
    return 0


def cmd_train_seg(args) -> int:
    bundle = _load_bundle(args.params)
    trials = load_trials(args.trials)
    traces = [[GazeSample(j, s.x, s.y) for j, s in enumerate(t.pre_select)] for t in trials]
    result = train_segmentation(traces, init=bundle.seg, max_iters=args.max_iters, tol=args.tol)
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    save_params(ParamsBundle(seg=result.params, intent=bundle.intent), args.out)
    print(f"trained on {len(traces)} traces, {len(result.log_likelihoods)} EM iterations, "
          f"final log-likelihood {result.log_likelihoods[-1]:.2f}; wrote {args.out}")
    return 0


def cmd_train_intent(args) -> int:
    bundle = _load_bundle(args.params)
    trials = load_trials(args.trials)
    corpus = []
    for trial in trials:
        trace = [GazeSample(j, s.x, s.y) for j, s in enumerate(trial.pre_select)]
        scanpath = extract_fixations(trace, viterbi_labels(trace, bundle.seg))
        if scanpath:
            corpus.append((scanpath, trial.layout, trial.true_target))
    if not corpus:
        raise SystemExit("no trial produced a usable scanpath")
    result = train_intent(corpus, init=bundle.intent, max_iters=args.max_iters, tol=args.tol)
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    save_params(ParamsBundle(seg=bundle.seg, intent=result.params), args.out)
    print(f"trained on {len(corpus)} scanpaths, {len(result.log_likelihoods)} EM iterations, "
          f"p_s = {result.params.p_s}; wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    bundle = _load_bundle(args.params)
    app = create_app(bundle.seg, bundle.intent,
                     policy=parse_policy(args.policy),
                     quantize=args.quantize,
                     include_posterior=not args.hide_posterior,
                     consecutive_buttons=args.consecutive_buttons,
                     frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gazedwell",
                                     description="gaze model, dwell policies and session gateway")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_params(p):
        p.add_argument("--params", help="model parameter file (default: packaged table2-3.params)")

    p = sub.add_parser("segment", help="label a trial's pre-select trajectory")
    p.add_argument("trials", help="trace file")
    p.add_argument("--trial", type=int, help="only this trial index")
    add_params(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("infer", help="posterior over links for a trial")
    p.add_argument("trials", help="trace file")
    p.add_argument("--trial", type=int, help="only this trial index")
    add_params(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("synth", help="generate a synthetic trial corpus")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--min-links", type=int, default=6)
    p.add_argument("--max-links", type=int, default=12)
    p.add_argument("--jitter", type=float, default=4.0, help="pre-select jitter (px)")
    p.add_argument("--post-jitter", type=float, default=6.0, help="post-select jitter (px)")
    p.add_argument("--distractor-rate", type=float, default=0.12)
    add_params(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="evaluate one policy by trial replay")
    p.add_argument("--trials", required=True)
    p.add_argument("--policy", required=True, help="tmax,tmin,tbreak,pbreak (ms)")
    p.add_argument("--quantize", default="per-sample", help="per-sample or coarse:q")
    add_params(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("grid", help="exhaustive policy grid search")
    p.add_argument("--trials", required=True)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--frontier-out", help="also write the Pareto frontier CSV here")
    p.add_argument("--coarse", action="store_true",
                   help="coarse grid (100 ms / 0.2 steps) instead of the full one")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--quantize", default="per-sample")
    add_params(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("train-seg", help="fit the segmentation model on recorded trials")
    p.add_argument("--trials", required=True)
    p.add_argument("--out", required=True, help="parameter file to write")
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-6)
    add_params(p)
    p.set_defaults(func=cmd_train_seg)

    p = sub.add_parser("train-intent", help="fit the intent model on recorded trials")
    p.add_argument("--trials", required=True)
    p.add_argument("--out", required=True, help="parameter file to write")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    add_params(p)
    p.set_defaults(func=cmd_train_intent)

    p = sub.add_parser("serve", help="run the session gateway")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--policy", default="500,100,100,1")
    p.add_argument("--quantize", default="per-sample")
    p.add_argument("--hide-posterior", action="store_true",
                   help="omit posterior values from DWELLS messages")
    p.add_argument("--consecutive-buttons", action="store_true",
                   help="buttons need strictly consecutive samples instead of the window rule")
    p.add_argument("--frontend", default=str(Path(__file__).resolve().parents[2] / "frontend" / "dist"),
                   help="directory with the built demo UI (mounted at /)")
    add_params(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
