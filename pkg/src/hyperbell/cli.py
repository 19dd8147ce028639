"""Command-line front end.

    hyperbell simulate --experiment pol-bsm --state Psi+:psi+ --engine analytic
    hyperbell audit mom-bsm
    hyperbell sweep --experiment mom-bsm --all-states

Exit codes: 0 ok, 2 configuration error, 3 classification differs from --expect.
Every artifact is a pure function of the configuration, so repeated runs
with the same seed give byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from .detection import fmt
from .experiments import (
    AMBIGUOUS,
    ENGINES,
    EXPERIMENTS,
    SETUPS,
    ExperimentError,
    ExperimentSpec,
    achieved_classes,
    admissible_states,
    build_system,
    classify,
    network_for,
    signature_classes,
    signature_collisions,
    sweep_matrix,
)
from .ledger import audit, check_mode_conservation
from .source import MOM_LABELS, POL_LABELS, CouplingParams, ParameterError, all_states, baseline_source, parse_state

EXIT_OK, EXIT_CONFIG, EXIT_MISMATCH = 0, 2, 3
FORMATS = ("json", "csv")
TABLES = ("raw", "normalized")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str = "pol-bsm"
    state: str = "Psi+:psi+"
    engine: str = "analytic"
    samples: int = 100_000
    seed: int = 0
    coupling: float = 0.1
    coupling_phase: float = 0.0
    gains: dict = field(default_factory=dict)
    shards: int = 1
    table: str = "raw"
    format: str = "json"
    out: str | None = None
    expect: str | None = None
    override_ancilla: bool = False

    def validate(self) -> "RunConfig":
        if self.experiment not in SETUPS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {SETUPS}")
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}; choose from {ENGINES}")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}; choose from {FORMATS}")
        if self.table not in TABLES:
            raise ConfigError(f"unknown table kind {self.table!r}; choose from {TABLES}")
        if not isinstance(self.samples, int) or self.samples < 1:
            raise ConfigError("samples must be a positive integer")
        if not isinstance(self.shards, int) or self.shards < 1:
            raise ConfigError("shards must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if not self.coupling >= 0:
            raise ConfigError("coupling magnitude must be >= 0")
        for name, k in self.gains.items():
            if not k > 0:
                raise ConfigError(f"gain for {name!r} must be positive")
        if self.expect is not None and self.expect not in (*POL_LABELS, *MOM_LABELS, AMBIGUOUS):
            raise ConfigError(f"--expect {self.expect!r} is not a Bell label")
        try:
            parse_state(self.state)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def coupling_params(self) -> CouplingParams:
        return CouplingParams.polar(self.coupling, self.coupling_phase)


def _parse_gain(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"gain must look like NAME=VALUE, got {text!r}")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"gain value {value!r} is not a number") from None


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--experiment", choices=SETUPS)
    p.add_argument("--engine", choices=ENGINES)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, help="defaults to $HYPERBELL_SEED, then 0")
    p.add_argument("--shards", type=int, help="Monte-Carlo shards (does not change results)")
    p.add_argument("--coupling", type=float, help="coupling magnitude |C|")
    p.add_argument("--coupling-phase", type=float, help="coupling phase in radians")
    p.add_argument("--gain", action="append", type=_parse_gain, metavar="DET=K")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=FORMATS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperbell", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one state through one analyzer")
    _add_run_flags(sim)
    sim.add_argument("--state", help="hyper-Bell selector such as Phi-:psi+")
    sim.add_argument("--table", choices=TABLES, help="emit raw or normalized probabilities")
    sim.add_argument("--expect", help="exit 3 unless the classifier returns this label")
    sim.add_argument("--override-ancilla", action="store_true", default=None)

    aud = sub.add_parser("audit", help="zeropoint ledger of a shipped network")
    aud.add_argument("experiment")
    aud.add_argument("--coupling", type=float, default=0.1)

    sw = sub.add_parser("sweep", help="normalized signature matrix over many states")
    _add_run_flags(sw)
    sw.add_argument("--all-states", "--override-ancilla", dest="all_states", action="store_true",
                    help="sweep all 16 states, not only those with the required ancilla")
    return parser


def resolve_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    """Merge defaults, the JSON config file, the seed env var and CLI flags."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg = RunConfig.from_json(text)
        seed_in_file = "seed" in json.loads(text)
    else:
        seed_in_file = False
    if not seed_in_file and "HYPERBELL_SEED" in environ:
        try:
            cfg.seed = int(environ["HYPERBELL_SEED"])
        except ValueError:
            raise ConfigError(f"HYPERBELL_SEED={environ['HYPERBELL_SEED']!r} is not an integer") from None
    for name in ("experiment", "state", "engine", "samples", "seed", "shards", "coupling",
                 "coupling_phase", "table", "format", "out", "expect", "override_ancilla"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "gain", None):
        cfg.gains = {**cfg.gains, **dict(args.gain)}
    return cfg.validate()


def _metadata(cfg: RunConfig) -> dict:
    C = cfg.coupling_params().C
    meta = {
        "version": __version__,
        "experiment": cfg.experiment,
        "state": parse_state(cfg.state).label,
        "engine": cfg.engine,
        "seed": cfg.seed,
        "coupling": {"abs": fmt(abs(C)), "phase": fmt(cfg.coupling_phase), "re": fmt(C.real), "im": fmt(C.imag)},
        "gains": dict(sorted(cfg.gains.items())),
        "table": cfg.table,
    }
    if cfg.engine == "montecarlo":
        meta["samples"] = cfg.samples
    return meta


def _write(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_simulate(cfg: RunConfig) -> int:
    state = parse_state(cfg.state)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        coupling = cfg.coupling_params()
    if abs(coupling.C) > 0.2:
        print(f"warning: |C| = {abs(coupling.C):.3g} is outside the weak-coupling regime", file=sys.stderr)
    try:
        spec = ExperimentSpec(cfg.experiment, state, cfg.engine, cfg.samples, cfg.seed,
                              cfg.gains, coupling, cfg.override_ancilla)
    except ExperimentError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.engine == "montecarlo":
        from .detection import mc_joint

        system = build_system(spec.setup, spec.state, spec.coupling)
        table = mc_joint(system, spec.gains, samples=cfg.samples, seed=cfg.seed, shards=cfg.shards)
    else:
        from .experiments import run_experiment

        table = run_experiment(spec)
    label = classify(table, cfg.experiment)
    if cfg.table == "normalized":
        table = table.normalized()
    record = {"label": label, "expected": cfg.expect, "match": None if cfg.expect is None else label == cfg.expect}

    if cfg.format == "json":
        doc = {"meta": _metadata(cfg), "classification": record, "table": table.to_dict()}
        _write(json.dumps(doc, indent=2) + "\n", cfg.out)
    else:
        _write(table.to_csv(), cfg.out)
        side = {"meta": _metadata(cfg), "classification": record}
        if cfg.out is not None:
            Path(cfg.out).with_suffix(".meta.json").write_text(json.dumps(side, indent=2) + "\n")
    print(f"classification: {label}", file=sys.stderr)
    if cfg.expect is not None and label != cfg.expect:
        print(f"expected {cfg.expect}, got {label}", file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_audit(experiment: str, coupling: float = 0.1) -> int:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    cp = CouplingParams(coupling)
    if experiment == "n1-demo":
        system = network_for(experiment).build(baseline_source(cp, n_dof=1))
    else:
        system = build_system(experiment, admissible_states(experiment)[0], cp)
    ledger = audit(system)
    report = check_mode_conservation(system)
    achieved = achieved_classes(experiment, cp)
    doc = {
        "experiment": experiment,
        "N_zpf_source": ledger.n_zpf_source,
        "N_idle_channels": ledger.n_idle_channels,
        "N_max_class": ledger.n_max_class,
        "N_zpf_side": {str(k): v for k, v in sorted(ledger.n_zpf_side.items())},
        "n_dof": ledger.n_dof,
        "achieved_classes": achieved,
        "mode_conservation": {
            "input_mode_sets": report.n_inputs,
            "output_channels": report.n_outputs,
            "conserved": report.conserved,
        },
    }
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    lines = [f"zeropoint audit: {experiment}", ledger.summary(),
             f"achieved disjoint classes   {achieved}",
             f"mode sets in / channels out {report.n_inputs} / {report.n_outputs}"]
    for labels, sig in signature_classes(experiment, cp):
        pairs = " ".join(f"{a}{b}" for a, b in sorted(sig))
        lines.append(f"  {'/'.join(labels):<12} {pairs}")
    print("\n".join(lines), file=sys.stderr)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, every_state: bool = False) -> int:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        coupling = cfg.coupling_params()
    states = all_states() if every_state else admissible_states(cfg.experiment)
    pairs, rows = sweep_matrix(cfg.experiment, states, coupling)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state", *(f"{a}|{b}" for a, b in pairs)])
    for label, values in rows:
        # entries below 1e-14 are interference zeros left with roundoff
        w.writerow([label, *(f"{v:.12g}" if abs(v) > 1e-14 else "0" for v in values)])
    _write(buf.getvalue(), cfg.out)
    if every_state:
        collisions = signature_collisions(cfg.experiment, coupling)
        print(f"signature collisions in {cfg.experiment}: {len(collisions)}", file=sys.stderr)
        for a, b, shared in collisions:
            print(f"  {a} / {b}: {' '.join(x + y for x, y in shared)}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors already; keep 0 for --help/--version
        return int(exc.code or 0)
    try:
        if args.command == "audit":
            return cmd_audit(args.experiment, args.coupling)
        cfg = resolve_config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_sweep(cfg, args.all_states)
    except (ConfigError, ParameterError, ExperimentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
