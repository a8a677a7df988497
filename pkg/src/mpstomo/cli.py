"""Command-line front end: ``mpstomo {run,certify,bench,demo}``.

Configuration comes from an optional YAML file (``--config``) with the
sections ``state``, ``protocol``, ``noise`` and top-level ``trials``,
``seed``, ``threshold``, ``backend``, ``output``, ``bench``; command-line
flags override file values. Results are written as JSON lines (one header
record, one record per trial or benchmark row, one summary record) or as a
flat CSV table.

Exit status: 0 on success / all certificates accepted, 2 if any certificate
rejects, 1 on error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
import yaml

from . import __version__
from .certification import certify
from .errors import ConfigError, InvalidSpec, MpsTomoError
from .mps_core import DENSE_GUARD, MpsState
from .reconstruction import amplitude, attach, fidelity, reconstruct
from .seeding import derive_seed
from .states import StateSpec, build, build_mps, perturb
from .tomography import (
    NoiseConfig,
    ProtocolConfig,
    TruncationAbort,
    run_protocol,
    run_protocol_mps,
    settings_per_window,
)

log = logging.getLogger("mpstomo")

EXIT_OK, EXIT_ERROR, EXIT_REJECT = 0, 1, 2
NOISE_FLAGS = {"exact": "exact", "perturb": "subspace_perturbation", "shots": "shots"}
RANDOM_FAMILIES = ("random_mps", "haar_random")


@dataclass(frozen=True)
class ExperimentConfig:
    state: StateSpec
    protocol: ProtocolConfig
    trials: int = 1
    seed: int = 0
    threshold: float = 1e-3
    backend: str = "auto"
    perturb_delta: float = 0.0
    out: str = None
    fmt: str = "records"
    sizes: tuple = (8, 16, 32, 64)

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials", f"must be >= 1, got {self.trials}")
        if self.backend not in ("auto", "dense", "mps"):
            raise ConfigError("backend", f"expected auto, dense or mps, got {self.backend!r}")
        if self.fmt not in ("records", "table"):
            raise ConfigError("format", f"expected records or table, got {self.fmt!r}")
        if not 0 <= self.threshold <= 1:
            raise ConfigError("threshold", "must lie in [0, 1]")
        if not 0 <= self.perturb_delta <= 1:
            raise ConfigError("state.perturb", "must lie in [0, 1]")

    def to_mapping(self) -> dict:
        noise = self.protocol.noise
        return {
            "state": self.state.to_mapping(),
            "perturb": self.perturb_delta,
            "protocol": {
                "chi": self.protocol.chi,
                "k": self.protocol.window(self.state.d),
                "abort_threshold": self.protocol.truncation_abort_threshold,
            },
            "noise": {"mode": noise.mode, "epsilon": noise.epsilon, "shots": noise.shots},
            "trials": self.trials,
            "seed": self.seed,
            "threshold": self.threshold,
            "backend": self.backend,
        }


# --------------------------------------------------------------------------
# config assembly


def _load_file(path: str) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return data


def build_config(args: argparse.Namespace, defaults: dict = None) -> ExperimentConfig:
    """Merge file values, command defaults and flags (flags win)."""
    data = dict(defaults or {})
    for key, value in _load_file(getattr(args, "config", None)).items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value
    state = dict(data.get("state", {}))
    protocol = dict(data.get("protocol", {}))
    noise = dict(data.get("noise", {}))
    output = dict(data.get("output", {}))

    for flag, key in (("family", "family"), ("n", "n"), ("d", "d"), ("phi", "phi")):
        if getattr(args, flag, None) is not None:
            state[key] = getattr(args, flag)
    if getattr(args, "chi", None) is not None:
        protocol["chi"] = args.chi
    if getattr(args, "k", None) is not None:
        protocol["k"] = args.k
    if args.noise is not None:
        noise["mode"] = args.noise
    if args.epsilon is not None:
        noise["epsilon"] = args.epsilon
    if args.shots is not None:
        noise["shots"] = args.shots
    if args.out is not None:
        output["path"] = args.out
    if args.format is not None:
        output["format"] = args.format

    delta = float(state.pop("perturb", 0.0) if getattr(args, "perturb", None) is None else args.perturb)
    if "n" not in state:
        raise ConfigError("state.n", "site count is required")
    try:
        spec = StateSpec.from_mapping(state)
    except InvalidSpec as exc:
        raise ConfigError("state", str(exc)) from exc

    mode = NOISE_FLAGS.get(noise.get("mode", "exact"), noise.get("mode", "exact"))
    unknown = set(protocol) - {"chi", "k", "abort_threshold", "bond_cap"}
    if unknown:
        raise ConfigError("protocol", f"unknown keys {sorted(unknown)}")
    if "chi" not in protocol:
        raise ConfigError("chi", "assumed bond dimension is required")
    proto = ProtocolConfig(
        chi=int(protocol["chi"]),
        k=None if protocol.get("k") is None else int(protocol["k"]),
        noise=NoiseConfig(
            mode=mode,
            epsilon=float(noise.get("epsilon", 0.0)),
            shots=int(noise.get("shots", 1000)),
        ),
        truncation_abort_threshold=float(protocol.get("abort_threshold", 0.5)),
        bond_cap=int(protocol.get("bond_cap", 4096)),
    )
    proto.window(spec.d)  # validates d**(k-1) >= chi

    sizes = data.get("bench", {}).get("sizes", (8, 16, 32, 64))
    if getattr(args, "sizes", None):
        sizes = [int(s) for s in args.sizes.split(",")]
    return ExperimentConfig(
        state=spec,
        protocol=proto,
        trials=int(args.trials if args.trials is not None else data.get("trials", 1)),
        seed=int(args.seed if args.seed is not None else data.get("seed", 0)),
        threshold=float(args.threshold if args.threshold is not None else data.get("threshold", 1e-3)),
        backend=args.backend or data.get("backend", "auto"),
        perturb_delta=delta,
        out=output.get("path"),
        fmt=output.get("format", "records"),
        sizes=tuple(int(s) for s in sizes),
    )


# --------------------------------------------------------------------------
# trial execution


def _max_workers() -> int:
    cap = os.environ.get("MPSTOMO_WORKERS")
    if cap:
        return max(1, int(cap))
    return min(4, os.cpu_count() or 1)


def _choose_backend(cfg: ExperimentConfig, spec: StateSpec) -> str:
    dense_ok = spec.d**spec.n <= DENSE_GUARD
    needs_dense = spec.family == "haar_random" or cfg.perturb_delta > 0
    if cfg.backend == "dense" and not dense_ok:
        raise ConfigError("backend", f"d**n = {spec.d}**{spec.n} exceeds the dense guard")
    if cfg.backend == "mps" and needs_dense:
        raise ConfigError("backend", "haar_random and perturbed states need the dense backend")
    if cfg.backend != "auto":
        return cfg.backend
    return "dense" if dense_ok else "mps"


def trial_inputs(cfg: ExperimentConfig, index: int) -> tuple[StateSpec, ProtocolConfig, dict]:
    seeds = {
        "trial": derive_seed(cfg.seed, index),
        "noise": derive_seed(cfg.seed, index, 1),
        "perturb": derive_seed(cfg.seed, index, 2),
    }
    spec = cfg.state
    if spec.family in RANDOM_FAMILIES:
        seeds["state"] = derive_seed(cfg.seed, index, 0, spec.seed)
        spec = replace(spec, seed=seeds["state"])
    noise = replace(cfg.protocol.noise, seed=seeds["noise"])
    return spec, replace(cfg.protocol, noise=noise), seeds


def _prepare(cfg: ExperimentConfig, spec: StateSpec, seeds: dict):
    backend = _choose_backend(cfg, spec)
    if backend == "mps":
        return backend, build_mps(spec)
    psi = build(spec)
    if cfg.perturb_delta > 0:
        psi = perturb(psi, cfg.perturb_delta, seeds["perturb"])
    return backend, psi


def run_trial(cfg: ExperimentConfig, index: int, reconstruct_state: bool = True) -> dict:
    spec, proto, seeds = trial_inputs(cfg, index)
    t0 = time.perf_counter()
    backend, target = _prepare(cfg, spec, seeds)
    runner = run_protocol_mps if backend == "mps" else run_protocol
    record = {"type": "trial", "index": index, "seeds": seeds, "backend": backend}
    try:
        result = runner(target, proto)
    except TruncationAbort as exc:
        record.update(aborted_at=exc.step, certificate={"verdict": "reject", "cumulative_bound": 1.0,
                      "threshold": cfg.threshold, "truncations": [], "noise": {}})
        record["metrics"] = {"wall_time_s": time.perf_counter() - t0}
        return record
    t1 = time.perf_counter()
    cert = certify(result.log, cfg.threshold, proto.noise)
    probs = result.log.probabilities
    record.update(
        windows=result.window_count,
        settings=result.settings_count,
        k=result.k,
        certificate=cert.to_dict(),
        truncation={
            "min_probability": float(probs.min()),
            "total": float(np.sum(result.log.truncations)),
            "probabilities": [float(p) for p in probs],
        },
    )
    if reconstruct_state:
        result = attach(result)
        rec = reconstruct(result)
        record["fidelity"] = fidelity(target, rec)
        record["bond_dims"] = rec.bond_dims
    t2 = time.perf_counter()
    record["metrics"] = {
        "wall_time_s": t2 - t0,
        "protocol_time_s": t1 - t0,
        "postprocess_time_s": t2 - t1,
        "eigendecompositions": result.window_count,
    }
    return record


def run_trials(cfg: ExperimentConfig, reconstruct_state: bool = True) -> list[dict]:
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        futures = [pool.submit(run_trial, cfg, i, reconstruct_state) for i in range(cfg.trials)]
        return [f.result() for f in futures]


def _header(command: str, cfg: ExperimentConfig) -> dict:
    return {"type": "header", "command": command, "version": __version__, "config": cfg.to_mapping()}


def _summary(trials: list[dict]) -> dict:
    verdicts = [t["certificate"]["verdict"] for t in trials]
    out = {
        "type": "summary",
        "trials": len(trials),
        "accepted": verdicts.count("accept"),
        "rejected": verdicts.count("reject"),
    }
    fids = [t["fidelity"] for t in trials if "fidelity" in t]
    if fids:
        out["min_fidelity"] = float(min(fids))
        out["mean_fidelity"] = float(np.mean(fids))
    return out


def cmd_run(cfg: ExperimentConfig) -> list[dict]:
    trials = run_trials(cfg)
    return [_header("run", cfg), *trials, _summary(trials)]


def cmd_certify(cfg: ExperimentConfig) -> list[dict]:
    trials = run_trials(cfg, reconstruct_state=False)
    return [_header("certify", cfg), *trials, _summary(trials)]


def cmd_bench(cfg: ExperimentConfig) -> list[dict]:
    """Settings count and timing over chain lengths, always on the MPS backend."""
    rows = []
    prev = None
    d = cfg.state.d
    for n in cfg.sizes:
        spec = replace(cfg.state, n=n)
        if spec.family == "haar_random":
            raise ConfigError("state.family", "bench needs a family with an MPS form")
        if spec.family == "random_mps":
            spec = replace(spec, seed=derive_seed(cfg.seed, n, 0, spec.seed))
        mps = build_mps(spec)
        t0 = time.perf_counter()
        result = run_protocol_mps(mps, cfg.protocol)
        t1 = time.perf_counter()
        rec = reconstruct(attach(result))
        t2 = time.perf_counter()
        row = {
            "type": "bench",
            "n": n,
            "k": result.k,
            "windows": result.window_count,
            "settings_per_window": settings_per_window(d, result.k),
            "settings": result.settings_count,
            "full_tomography_parameters": str(d ** (2 * n) - 1),
            "min_probability": float(result.log.probabilities.min()),
            "max_bond": rec.max_bond,
            "metrics": {"protocol_time_s": t1 - t0, "postprocess_time_s": t2 - t1},
        }
        if prev is not None:
            row["metrics"]["time_ratio"] = (t2 - t0) / max(prev, 1e-12)
        prev = t2 - t0
        rows.append(row)
    return [_header("bench", cfg), *rows]


def recovered_ghz_phase(result) -> float:
    t = result.tensors
    return float(np.angle(amplitude(t, "1" * t.n) / amplitude(t, "0" * t.n)) % (2 * math.pi))


def recovered_w_phases(result) -> np.ndarray:
    """Phases of the single-excitation branches relative to the first one."""
    t = result.tensors
    amps = []
    for i in range(t.n):
        z = [0] * t.n
        z[i] = 1
        amps.append(amplitude(t, z))
    amps = np.array(amps)
    return np.angle(amps / amps[0]) % (2 * math.pi)


def cmd_demo(cfg: ExperimentConfig, out=None) -> list[dict]:
    """Plant hidden phases in GHZ/W states and read them back from the reconstruction."""
    out = out or sys.stderr
    family = cfg.state.family
    if family not in ("ghz", "w"):
        raise ConfigError("state.family", "demo supports ghz and w")
    records = [_header("demo", cfg)]
    for t in range(cfg.trials):
        rng = np.random.default_rng(derive_seed(cfg.seed, t, 3))
        n = cfg.state.n
        if family == "ghz":
            phi = cfg.state.phi if cfg.trials == 1 and cfg.state.phi else float(rng.uniform(0, 2 * math.pi))
            spec = replace(cfg.state, phi=phi)
            planted = [phi]
        else:
            planted = list(rng.uniform(0, 2 * math.pi, size=n))
            spec = replace(cfg.state, phases=tuple(planted))
        psi = build(spec)
        noise = replace(cfg.protocol.noise, seed=derive_seed(cfg.seed, t, 1))
        result = attach(run_protocol(psi, replace(cfg.protocol, noise=noise)))
        fid = fidelity(psi, reconstruct(result))
        if family == "ghz":
            recovered = [recovered_ghz_phase(result)]
        else:
            recovered = list(recovered_w_phases(result))
            planted = list((np.array(planted) - planted[0]) % (2 * math.pi))
        err = [abs((r - p + math.pi) % (2 * math.pi) - math.pi) for r, p in zip(recovered, planted)]
        print(f"[{family} trial {t}] eta = {np.round(result.eta, 6)}", file=out)
        print(f"  final window state = {np.round(result.final_window_state(), 6)}", file=out)
        print(f"  planted   phases = {np.round(planted, 10)}", file=out)
        print(f"  recovered phases = {np.round(recovered, 10)}", file=out)
        print(f"  fidelity = {fid:.12f}   max phase error = {max(err):.3e}", file=out)
        records.append({
            "type": "demo",
            "index": t,
            "family": family,
            "planted_phases": [float(p) for p in planted],
            "recovered_phases": [float(r) for r in recovered],
            "max_phase_error": float(max(err)),
            "fidelity": fid,
            "eta": [[float(z.real), float(z.imag)] for z in result.eta],
        })
    return records


# --------------------------------------------------------------------------
# output


def load_schema() -> dict:
    return json.loads(resources.files("mpstomo").joinpath("manifest.schema.json").read_text())


def _flatten(record: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        elif isinstance(value, list):
            flat[name] = json.dumps(value)
        else:
            flat[name] = value
    return flat


def render(records: list[dict], fmt: str) -> str:
    if fmt == "records":
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    rows = [_flatten(r) for r in records if r["type"] in ("trial", "bench", "demo")]
    columns = sorted({c for row in rows for c in row})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


COMMANDS = {"run": cmd_run, "certify": cmd_certify, "bench": cmd_bench, "demo": cmd_demo}

DEFAULTS = {
    "run": {},
    "certify": {},
    "bench": {"state": {"family": "random_mps", "n": 8, "chi": 2}, "protocol": {"chi": 2}},
    "demo": {"state": {"family": "ghz", "n": 6}, "protocol": {"chi": 2}},
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpstomo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML experiment file")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("records", "table"))
        p.add_argument("--backend", choices=("dense", "mps", "auto"))
        p.add_argument("--noise", choices=tuple(NOISE_FLAGS))
        p.add_argument("--epsilon", type=float)
        p.add_argument("--shots", type=int)
        p.add_argument("--chi", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--threshold", type=float, help="certification threshold on 1 - prod(p_i)")
        p.add_argument("--family", choices=("ghz", "w", "product", "random_mps", "haar_random"))
        p.add_argument("--n", type=int)
        p.add_argument("--d", type=int)
        p.add_argument("--phi", type=float, help="GHZ relative phase")
        p.add_argument("--perturb", type=float, help="mix in a random vector with this weight")
        if name == "bench":
            p.add_argument("--sizes", help="comma-separated chain lengths")
        if name == "demo":
            p.set_defaults(trials=None)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = build_config(args, DEFAULTS[args.command])
        records = COMMANDS[args.command](cfg)
    except MpsTomoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = render(records, cfg.fmt)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    rejected = any(
        r.get("certificate", {}).get("verdict") == "reject" for r in records if r["type"] == "trial"
    )
    return EXIT_REJECT if rejected else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
