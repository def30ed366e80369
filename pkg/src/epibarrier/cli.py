"""Command-line front end: scenario JSON in, CSV/JSON artifacts out.

Subcommands: classify, barrier, simulate, montecarlo, oracle.  Every command
takes --config pointing at a JSON scenario document and optional --tol
key=value overrides; outputs are written atomically (temp file + rename) with
a run manifest so reruns with identical inputs are bit-reproducible.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .analysis import EmptyTangentError, classify, tangent_set, backward_filter, usable_part
from .barrier import ComputedSet, Verdict, assemble_set, membership
from .core import Scenario, ScenarioError, SetKind, Tolerances, validate_scenario
from .models import BadChannelError, Channel, InputVec, active_channels
from .policy_sim import (
    AffineFeedbackPolicy,
    ConstantPolicy,
    SwitchingLawPolicy,
    grid_membership_oracle,
    membership_oracle,
    monte_carlo,
    simulate,
)

__all__ = ["main", "load_set"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_COMPUTE = 3


class InputError(Exception):
    """User-facing input problem mapped to exit code 2."""


# ---------------------------------------------------------------------------
# io helpers
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    _write_atomic(path, "\n".join(lines) + "\n")


def _write_json(path: str, doc) -> None:
    _write_atomic(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _manifest(command: str, raw_config: dict, tol: Tolerances, seed, t0: float) -> dict:
    digest = hashlib.sha256(
        json.dumps(raw_config, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
    return {
        "command": command,
        "scenario_digest": digest,
        "tolerances": dataclasses.asdict(tol),
        "seed": seed,
        "version": __version__,
        "runtime_s": time.monotonic() - t0,
    }


def _load_config(args) -> tuple[dict, Scenario, Tolerances]:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise InputError(f"REJECT_FIELDS: config is not valid JSON: {exc}")
    scenario = validate_scenario(raw)
    tol_fields = dict(raw.get("tolerances") or {})
    for item in args.tol or []:
        if "=" not in item:
            raise InputError(f"--tol expects key=value, got {item!r}")
        key, _, val = item.partition("=")
        tol_fields[key.strip()] = val
    known = {f.name for f in dataclasses.fields(Tolerances)}
    extra = set(tol_fields) - known
    if extra:
        raise InputError(f"unknown tolerance fields: {sorted(extra)}")
    try:
        tol = Tolerances(**{k: float(v) for k, v in tol_fields.items()})
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad tolerance override: {exc}")
    return raw, scenario, tol


def _parse_set_kind(scenario: Scenario, name: str) -> SetKind:
    kind = SetKind(name)
    if kind is SetKind.ADMISSIBLE and not scenario.variant.is_perfect:
        raise InputError(
            f"BAD_SET_KIND: {scenario.variant.value} has no controllable "
            "input; only the robust invariant set is defined"
        )
    return kind


def _parse_x0(scenario: Scenario, text: str) -> np.ndarray:
    try:
        x = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise InputError(f"bad --x0 {text!r}")
    if x.shape != (scenario.dim,):
        raise InputError(
            f"--x0 needs {scenario.dim} components for {scenario.variant.value}"
        )
    if np.min(x) < 0.0 or np.sum(x) > 1.0 + 1e-12:
        raise InputError(f"--x0 {text!r} outside the unit simplex")
    return x


def _input_columns(scenario: Scenario) -> list[Channel]:
    return list(active_channels(scenario.variant))


# ---------------------------------------------------------------------------
# set.json export / import
# ---------------------------------------------------------------------------


def _set_document(cset: ComputedSet, raw_config: dict, curve_files, manifest) -> dict:
    doc = {
        "config": raw_config,
        "set_kind": cset.set_kind.value,
        "trivial": cset.trivial,
        "manifest": manifest,
        "tolerances": dataclasses.asdict(cset.tolerances),
    }
    if cset.trivial:
        return doc
    up = cset.usable
    doc["usable_part"] = {"s_hi": up.s_hi, "e_cap_const": up.e_cap_const}
    doc["special_segments"] = [seg.tolist() for seg in cset.special_segments]
    doc["curves"] = [
        {
            "file": fname,
            "tangent_point": c.tangent_point.tolist(),
            "termination": c.termination.label,
            "switch_times": [[t, ch.value] for t, ch in c.switch_times],
            "truncated": c.truncated,
        }
        for fname, c in zip(curve_files, cset.curves)
    ]
    if cset.polyline is not None:
        doc["polyline"] = cset.polyline.tolist()
    if cset.mesh_nodes is not None:
        doc["mesh_nodes"] = cset.mesh_nodes.tolist()
    return doc


def load_set(path: str) -> ComputedSet:
    """Rebuild a queryable ComputedSet from an exported set.json."""
    with open(path) as fh:
        doc = json.load(fh)
    scenario = validate_scenario(doc["config"])
    tol = Tolerances(**doc["tolerances"])
    kind = SetKind(doc["set_kind"])
    if doc["trivial"]:
        return ComputedSet(scenario, kind, trivial=True, tolerances=tol)
    return ComputedSet(
        scenario,
        kind,
        trivial=False,
        usable=usable_part(scenario, kind),
        polyline=np.array(doc["polyline"]) if "polyline" in doc else None,
        mesh_nodes=np.array(doc["mesh_nodes"]) if "mesh_nodes" in doc else None,
        special_segments=[np.array(s) for s in doc["special_segments"]],
        tolerances=tol,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_classify(args) -> int:
    raw, scenario, tol = _load_config(args)
    t0 = time.monotonic()
    result = classify(scenario)
    doc = {
        "tag": result.tag.value,
        "witnesses": result.witnesses,
        "manifest": _manifest("classify", raw, tol, None, t0),
    }
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def _curve_rows(scenario, curve):
    chans = _input_columns(scenario)
    for s in curve.samples:
        row = [-s.tau]
        row.extend(float(v) for v in s.state)
        row.extend(float(v) for v in s.adjoint)
        row.extend(s.u.get(ch) for ch in chans)
        row.append(int(s.is_switch))
        yield row


def cmd_barrier(args) -> int:
    raw, scenario, tol = _load_config(args)
    kind = _parse_set_kind(scenario, args.set)
    t0 = time.monotonic()
    cset = assemble_set(scenario, kind, n_curves=args.curves, tolerances=tol)
    os.makedirs(args.out, exist_ok=True)
    curve_files = []
    state_cols = ["S", "I"] if scenario.variant.is_sir else ["S", "E", "I"]
    lam_cols = [f"lambda{k + 1}" for k in range(scenario.dim)]
    in_cols = [ch.value for ch in _input_columns(scenario)]
    header = ["t"] + state_cols + lam_cols + in_cols + ["switch_flag"]
    for idx, curve in enumerate(cset.curves):
        fname = f"curve_{idx:03d}.csv"
        if args.format == "csv":
            _write_csv(
                os.path.join(args.out, fname), header, _curve_rows(scenario, curve)
            )
        else:
            _write_json(
                os.path.join(args.out, fname.replace(".csv", ".json")),
                {
                    "columns": header,
                    "rows": [list(r) for r in _curve_rows(scenario, curve)],
                },
            )
        curve_files.append(fname)
    manifest = _manifest("barrier", raw, tol, None, t0)
    doc = _set_document(cset, raw, curve_files, manifest)
    _write_json(os.path.join(args.out, "set.json"), doc)
    print(json.dumps({"trivial": cset.trivial, "n_curves": len(cset.curves)}))
    return EXIT_OK


def _build_policy(args, scenario, tol):
    spec_text = args.policy
    name, _, rest = spec_text.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, _, val = item.partition("=")
            try:
                params[key.strip()] = float(val)
            except ValueError:
                raise InputError(f"bad policy parameter {item!r}")
    if name == "constant":
        try:
            return ConstantPolicy(scenario, InputVec(**params))
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad constant policy: {exc}")
    if name == "feedback":
        return AffineFeedbackPolicy(scenario, InputVec(**params) if params else None)
    if name == "switching":
        adm = assemble_set(scenario, SetKind.ADMISSIBLE, tolerances=tol)
        mrpi = assemble_set(scenario, SetKind.MRPI, tolerances=tol)
        return SwitchingLawPolicy(scenario, adm, mrpi)
    raise InputError(f"unknown policy {name!r}")


def cmd_simulate(args) -> int:
    raw, scenario, tol = _load_config(args)
    x0 = _parse_x0(scenario, args.x0)
    t0 = time.monotonic()
    policy = _build_policy(args, scenario, tol)
    traj = simulate(scenario, policy, x0, args.t_end, tol)
    os.makedirs(args.out, exist_ok=True)
    state_cols = ["S", "I"] if scenario.variant.is_sir else ["S", "E", "I"]
    chans = _input_columns(scenario)
    header = ["t"] + state_cols + ["R"] + [ch.value for ch in chans]
    rows = (
        [t] + [float(v) for v in x] + [1.0 - float(np.sum(x))] + [u.get(ch) for ch in chans]
        for t, x, u in traj.samples
    )
    _write_csv(os.path.join(args.out, "trajectory.csv"), header, rows)
    summary = {
        "breached": traj.breached,
        "max_I": traj.max_I,
        "first_breach_time": traj.first_breach_time,
        "manifest": _manifest("simulate", raw, tol, None, t0),
    }
    _write_json(os.path.join(args.out, "summary.json"), summary)
    print(json.dumps({"breached": traj.breached, "max_I": traj.max_I}))
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    raw, scenario, tol = _load_config(args)
    if scenario.variant.is_perfect:
        raise InputError(
            "montecarlo needs an imperfect variant (uncertain disturbance)"
        )
    x0 = _parse_x0(scenario, args.x0)
    t0 = time.monotonic()
    trajs = monte_carlo(
        scenario, x0, args.n, args.seed, t_end=args.t_end, tolerances=tol, h=1e-2
    )
    os.makedirs(args.out, exist_ok=True)
    state_cols = ["S", "I"] if scenario.variant.is_sir else ["S", "E", "I"]
    chans = _input_columns(scenario)
    header = ["t"] + state_cols + ["R"] + [ch.value for ch in chans]
    for idx, traj in enumerate(trajs):
        rows = (
            [t] + [float(v) for v in x] + [1.0 - float(np.sum(x))] + [u.get(ch) for ch in chans]
            for t, x, u in traj.samples
        )
        _write_csv(os.path.join(args.out, f"trial_{idx:03d}.csv"), header, rows)
    aggregate = {
        "n_trials": len(trajs),
        "n_breached": int(sum(bool(t.breached) for t in trajs)),
        "max_I": max((t.max_I for t in trajs), default=None),
        "manifest": _manifest("montecarlo", raw, tol, args.seed, t0),
    }
    _write_json(os.path.join(args.out, "aggregate.json"), aggregate)
    print(json.dumps({"n_breached": aggregate["n_breached"]}))
    return EXIT_OK


def cmd_oracle(args) -> int:
    raw, scenario, tol = _load_config(args)
    kind = _parse_set_kind(scenario, args.set)
    if not scenario.variant.is_sir:
        if args.points is None:
            raise InputError(
                "the grid oracle is two-dimensional; use --points for SEIR"
            )
        return _oracle_points(args, raw, scenario, tol, kind)
    t0 = time.monotonic()
    cset = assemble_set(scenario, kind, tolerances=tol)
    adm = mrpi = None
    if kind is SetKind.ADMISSIBLE:
        adm = cset
        mrpi = assemble_set(scenario, SetKind.MRPI, tolerances=tol)
    s_axis = np.linspace(0.0, 1.0, args.grid)
    i_axis = np.linspace(0.0, scenario.i_max, args.grid)
    pts = np.array([(s, i) for s in s_axis for i in i_axis if s + i <= 1.0])
    oracle_inside = grid_membership_oracle(
        scenario,
        kind,
        pts,
        seed=args.seed,
        admissible_set=adm,
        mrpi_set=mrpi,
        tolerances=tol,
    )
    rows = []
    n_compared = n_agree = 0
    for p, o_in in zip(pts, oracle_inside):
        verd = membership(cset, p).verdict
        if verd in (Verdict.INSIDE, Verdict.OUTSIDE):
            agrees = (verd is Verdict.INSIDE) == bool(o_in)
            n_compared += 1
            n_agree += agrees
        else:
            agrees = True
        rows.append([float(p[0]), float(p[1]), verd.value, int(agrees)])
    os.makedirs(args.out, exist_ok=True)
    _write_csv(
        os.path.join(args.out, "oracle_grid.csv"),
        ["S", "I", "verdict", "oracle_agrees"],
        rows,
    )
    rate = 1.0 if n_compared == 0 else n_agree / n_compared
    summary = {
        "n_points": len(pts),
        "n_compared": n_compared,
        "agreement_rate": rate,
        "manifest": _manifest("oracle", raw, tol, args.seed, t0),
    }
    _write_json(os.path.join(args.out, "oracle_summary.json"), summary)
    print(json.dumps({"agreement_rate": rate}))
    return EXIT_OK


def _oracle_points(args, raw, scenario, tol, kind) -> int:
    try:
        pts = [
            np.array([float(v) for v in chunk.split(",")])
            for chunk in args.points.split(";")
            if chunk.strip()
        ]
    except ValueError:
        raise InputError(f"bad --points {args.points!r}")
    t0 = time.monotonic()
    cset = assemble_set(scenario, kind, tolerances=tol)
    rows = []
    n_compared = n_agree = 0
    for p in pts:
        if p.shape != (scenario.dim,):
            raise InputError(f"point {p.tolist()} has wrong dimension")
        rep = membership_oracle(
            scenario, kind, p, seed=args.seed, computed_set=cset, tolerances=tol
        )
        if rep.claimed in (Verdict.INSIDE, Verdict.OUTSIDE):
            n_compared += 1
            n_agree += rep.agree
        rows.append(
            [float(v) for v in p] + [rep.claimed.value, int(rep.agree)]
        )
    os.makedirs(args.out, exist_ok=True)
    _write_csv(
        os.path.join(args.out, "oracle_points.csv"),
        ["S", "E", "I", "verdict", "oracle_agrees"],
        rows,
    )
    rate = 1.0 if n_compared == 0 else n_agree / n_compared
    _write_json(
        os.path.join(args.out, "oracle_summary.json"),
        {
            "n_points": len(pts),
            "n_compared": n_compared,
            "agreement_rate": rate,
            "manifest": _manifest("oracle", raw, tol, args.seed, t0),
        },
    )
    print(json.dumps({"agreement_rate": rate}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epibarrier",
        description="Cap-preserving set computation and simulation for "
        "SIR/SEIR epidemic models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument(
            "--tol",
            action="append",
            metavar="KEY=VALUE",
            help="tolerance override (repeatable)",
        )

    p = sub.add_parser("classify", help="evaluate the triviality inequalities")
    common(p)
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("barrier", help="compute set boundary curves")
    common(p)
    p.add_argument("--set", required=True, choices=["admissible", "mrpi"])
    p.add_argument("--curves", type=int, default=30)
    p.add_argument("--out", default=".")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(fn=cmd_barrier)

    p = sub.add_parser("simulate", help="forward simulation under a policy")
    common(p)
    p.add_argument("--policy", required=True, help="constant:...|feedback[:...]|switching")
    p.add_argument("--x0", required=True, help="comma-separated initial state")
    p.add_argument("--t-end", type=float, default=500.0, dest="t_end")
    p.add_argument("--out", default=".")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("montecarlo", help="seeded disturbance sweep")
    common(p)
    p.add_argument("--x0", required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-end", type=float, default=500.0, dest="t_end")
    p.add_argument("--out", default=".")
    p.set_defaults(fn=cmd_montecarlo)

    p = sub.add_parser("oracle", help="brute-force membership cross-check")
    common(p)
    p.add_argument("--set", required=True, choices=["admissible", "mrpi"])
    p.add_argument("--grid", type=int, default=30)
    p.add_argument("--points", help="semicolon-separated states (SEIR mode)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(fn=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (InputError, ScenarioError, BadChannelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EmptyTangentError as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except Exception as exc:  # compute failures
        print(f"compute error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
