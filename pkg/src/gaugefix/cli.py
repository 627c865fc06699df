"""Command-line harness.

Subcommands: evolve (field run from a JSON config, CSV diagnostics out),
symbol (hyperbolicity report as JSON), project (snapshot onto the
constraint surface), constraints (run the Dirac-Bergmann pipeline on a
built-in model). Exit codes: 0 success, 1 configuration or input error,
2 evolution aborted on non-finite values. Given the same config and seed
the outputs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import evolution, fields, symbols, toys
from .constraints import (
    GaugeNotFixedError,
    classify_constraints,
    commutation_matrix,
    consistency_chain,
    dirac_bracket,
    make_surface_sampler,
)
from .phase import poisson_bracket

SCENARIOS = ("plane_wave", "contaminated", "random_smooth")


class ConfigError(ValueError):
    """Bad run configuration (unknown keys, missing values, wrong types)."""


@dataclass
class RunConfig:
    """Evolution run description, loaded from JSON.

    Unknown keys are rejected outright so typos fail loudly instead of
    silently running defaults.
    """

    scenario: str
    dt: float
    t_end: float
    grid_n: int = 32
    domain_length: float = 2.0 * np.pi
    formulation: str = "canonical"
    stepper: str = "rk4"
    mode: tuple = (1, 0, 0)
    polarization: tuple = (0.0, 1.0, 0.0)
    amplitude: float = 1.0
    contamination_amplitude: float = 0.1
    reproject_every: int | None = None
    stride: int | None = None
    seed: int | None = None
    out_csv: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        known = {f.name for f in dataclass_fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = [k for k in ("scenario", "dt", "t_end") if k not in raw]
        if missing:
            raise ConfigError(f"missing required config keys: {', '.join(missing)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        try:
            self.dt = float(self.dt)
            self.t_end = float(self.t_end)
        except (TypeError, ValueError):
            raise ConfigError("dt and t_end must be numbers") from None
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive and finite, got {self.dt}")
        if not (self.t_end >= self.dt and np.isfinite(self.t_end)):
            raise ConfigError("t_end must be finite and at least one step long")
        if not isinstance(self.grid_n, int) or self.grid_n < 4:
            raise ConfigError(f"grid_n must be an integer >= 4, got {self.grid_n!r}")
        self.domain_length = float(self.domain_length)
        if not (self.domain_length > 0 and np.isfinite(self.domain_length)):
            raise ConfigError("domain_length must be positive and finite")
        if self.formulation not in ("canonical", "gauge-fixed", "gauge_fixed"):
            raise ConfigError(f"formulation must be canonical or gauge-fixed, "
                              f"got {self.formulation!r}")
        if self.stepper not in ("rk4", "stormer_verlet", "stormer-verlet"):
            raise ConfigError(f"stepper must be rk4 or stormer_verlet, got {self.stepper!r}")
        mode = np.asarray(self.mode)
        if mode.shape != (3,):
            raise ConfigError("mode must be a 3-vector of integers")
        pol = np.asarray(self.polarization, dtype=float)
        if pol.shape != (3,):
            raise ConfigError("polarization must be a 3-vector")
        if self.reproject_every is not None and (
                not isinstance(self.reproject_every, int) or self.reproject_every < 1):
            raise ConfigError("reproject_every must be a positive integer or null")
        if self.stride is not None and (not isinstance(self.stride, int) or self.stride < 1):
            raise ConfigError("stride must be a positive integer or null")
        if self.seed is not None and not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer or null")
        if self.scenario == "random_smooth" and self.seed is None:
            raise ConfigError("scenario random_smooth requires a seed")
        if self.scenario == "contaminated" and not self.contamination_amplitude > 0:
            raise ConfigError("scenario contaminated requires contamination_amplitude > 0")


def load_config(path, seed_override: int | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if seed_override is not None:
        raw = dict(raw, seed=seed_override)
    return RunConfig.from_dict(raw)


def build_initial_data(cfg: RunConfig):
    """Construct (state, reference) for a run config.

    plane_wave ships the exact standing-wave solution as reference;
    the other scenarios have none, so the l2_error column will be NaN.
    """
    try:
        if cfg.scenario in ("plane_wave", "contaminated"):
            kind = "transverse" if cfg.scenario == "plane_wave" else "contaminated"
            state = fields.plane_wave_initial_data(
                cfg.mode, cfg.polarization, cfg.amplitude, kind=kind,
                grid_n=cfg.grid_n, domain_length=cfg.domain_length,
                contamination_amplitude=cfg.contamination_amplitude)
            reference = None
            if cfg.scenario == "plane_wave":
                reference = fields.plane_wave_reference(
                    cfg.mode, cfg.polarization, cfg.amplitude,
                    grid_n=cfg.grid_n, domain_length=cfg.domain_length)
            return state, reference
        rng = np.random.default_rng(cfg.seed)
        a_raw, pi_raw = fields.random_smooth_fields(
            rng, cfg.grid_n, cfg.domain_length, cfg.amplitude)
        return fields.correct_initial_data(a_raw, pi_raw, cfg.domain_length), None
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_evolve(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    if args.formulation is not None:
        cfg.formulation = args.formulation
        cfg.validate()
    out = args.out or cfg.out_csv
    if out is None:
        raise ConfigError("no output path: pass --out or set out_csv in the config")
    state, reference = build_initial_data(cfg)
    series = evolution.evolve(
        state, cfg.formulation, cfg.stepper, cfg.dt, cfg.t_end,
        reproject_every=cfg.reproject_every, reference=reference,
        stride=cfg.stride)
    series.to_csv(out)
    if series.aborted:
        print(f"evolution aborted at t={series.abort_time!r}: non-finite state",
              file=sys.stderr)
        print(f"wrote {out} ({len(series.t)} rows, aborted)")
        return 2
    print(f"wrote {out} ({len(series.t)} rows)")
    return 0


def cmd_symbol(args) -> int:
    if args.formulation == "canonical":
        sym = symbols.maxwell_canonical_symbol()
    else:
        sym = symbols.maxwell_gauge_fixed_symbol()
    report = symbols.analyze_symbol(sym, tol_imag=args.tol,
                                    seed=0 if args.seed is None else args.seed)
    text = json.dumps(report.to_json_dict(), indent=2, sort_keys=True,
                      allow_nan=False) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"classification: {report.classification.value} (wrote {args.out})")
    else:
        sys.stdout.write(text)
    return 0


def cmd_project(args) -> int:
    state = fields.read_snapshot(args.input)
    before = fields.constraint_norms(state)
    projected = fields.project_state(state)
    after = fields.constraint_norms(projected)
    fields.write_snapshot(projected, args.out)
    print(f"before: norm_divA={before[0]!r} norm_divPi={before[1]!r}")
    print(f"after:  norm_divA={after[0]!r} norm_divPi={after[1]!r}")
    if args.tol > 0 and max(after) >= args.tol:
        print(f"projection left constraint norms above tol={args.tol!r}",
              file=sys.stderr)
        return 1
    return 0


def cmd_constraints(args) -> int:
    model = toys.get_model(args.model)
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    sampler = make_surface_sampler(rng)
    form = model.system.form

    chain = consistency_chain(model.system, model.primaries, sampler)
    classified = classify_constraints(chain, sampler, form=form)
    point = model.sample_point
    mat = commutation_matrix(classified, point, form)

    checks = []
    note = None
    pairs = [(fa, fb) for i, fa in enumerate(model.check_functions)
             for fb in model.check_functions[i + 1:]]
    for (la, fa), (lb, fb) in pairs:
        entry = {
            "f": la,
            "g": lb,
            "poisson": float(np.round(poisson_bracket(fa, fb, point, form), 14)),
        }
        try:
            entry["dirac"] = float(np.round(
                dirac_bracket(fa, fb, classified, point, form), 14))
        except GaugeNotFixedError as exc:
            entry["dirac"] = None
            note = str(exc)
        checks.append(entry)

    result = {
        "model": model.name,
        "phase_dim": classified.dim,
        "primaries": model.primaries.labels,
        "chain": [{"label": c.label, "origin": c.origin.value} for c in classified],
        "classification": [
            {"label": c.label, "class": c.class_label.value} for c in classified
        ],
        "commutation_matrix": {
            "point": [float(v) for v in point],
            "entries": [[float(np.round(v, 14)) for v in row] for row in mat.entries],
        },
        "dirac_checks": checks,
    }
    if note is not None:
        result["dirac_note"] = note
    text = json.dumps(result, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaugefix",
        description="constrained Maxwell evolution and Dirac-Bergmann analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_evolve = sub.add_parser("evolve", help="run a field evolution from a JSON config")
    p_evolve.add_argument("--config", required=True, help="path to the run config JSON")
    p_evolve.add_argument("--formulation", choices=["canonical", "gauge-fixed"],
                          default=None, help="override the config's formulation")
    p_evolve.add_argument("--out", default=None, help="diagnostics CSV path")
    p_evolve.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_evolve.set_defaults(func=cmd_evolve)

    p_symbol = sub.add_parser("symbol", help="principal-symbol hyperbolicity report")
    p_symbol.add_argument("--formulation", choices=["canonical", "gauge-fixed"],
                          required=True)
    p_symbol.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p_symbol.add_argument("--tol", type=float, default=1e-10,
                          help="imaginary-part tolerance for eigenvalues")
    p_symbol.add_argument("--seed", type=int, default=None,
                          help="seed for the random direction samples")
    p_symbol.set_defaults(func=cmd_symbol)

    p_project = sub.add_parser("project", help="project a snapshot onto the constraint surface")
    p_project.add_argument("input", help="snapshot file to project")
    p_project.add_argument("--out", required=True, help="projected snapshot path")
    p_project.add_argument("--tol", type=float, default=0.0,
                           help="fail if post-projection norms exceed this (0 disables)")
    p_project.set_defaults(func=cmd_project)

    p_con = sub.add_parser("constraints", help="Dirac-Bergmann pipeline on a built-in model")
    p_con.add_argument("model", choices=sorted(toys.BUILTIN_MODELS))
    p_con.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p_con.add_argument("--seed", type=int, default=None,
                       help="seed for the on-surface sampler")
    p_con.set_defaults(func=cmd_constraints)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, fields.SnapshotFormatError, ValueError) as exc:
        # ValueError covers library input guards reachable from the command
        # line, such as --tol 0 or a malformed GAUGEFIX_THREADS.
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
