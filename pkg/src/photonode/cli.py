"""Command-line entry point.

Usage::

    photonode <experiment> [--config run.json] [--seed N] [--exact-frequency]
              [--out DIR] [--preset NAME] [--counts CSV] [--target CSV|NAME] ...

Experiments: hom, prepare, tomo-onchip, chip-to-chip, mle, calibrate.
Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import chip, experiments
from .errors import (
    BootstrapError,
    DegeneratePostselectionError,
    MLEConvergenceError,
    NoConsistentConventionError,
)
from .states import TARGET_KETS, target_state
from .tomography import (
    CountsDataset,
    bootstrap_errors,
    fidelity,
    mle_reconstruct,
    purity,
    validate_density_matrix,
)

log = logging.getLogger("photonode")

EXPERIMENTS = ("hom", "prepare", "tomo-onchip", "chip-to-chip", "mle", "calibrate")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

NOISE_KEYS = ("crosstalk_epsilon", "arm_efficiencies", "phase_error_sigma", "overlap_gamma")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str
    preset: str = None
    input_state: str = None
    counts: str = None
    target: str = None
    noise: chip.NoiseParams = field(default_factory=chip.NoiseParams)
    sender_noise: chip.NoiseParams = None
    receiver_noise: chip.NoiseParams = None
    channel_unitaries: list = None
    shots_per_setting: int = 1_000_000
    resamples: int = 0
    seed: int = None
    exact_frequency: bool = False
    analytic: bool = False
    gamma0: float = 1.0
    coherence_time_ps: float = None
    delays_ps: list = None
    output_dir: str = "out"

    def sampling(self):
        if self.experiment == "hom":
            return not self.analytic
        if self.experiment == "mle":
            return self.resamples > 0
        if self.experiment == "calibrate":
            return False
        return not self.exact_frequency or self.resamples > 0

    def as_dict(self):
        """Resolved configuration, loadable again by :func:`parse_config`.

        ``output_dir`` is left out so reports do not depend on where they are
        written.
        """
        out = {
            "experiment": self.experiment,
            "preset": self.preset,
            "input_state": self.input_state,
            "counts": self.counts,
            "target": self.target,
            "noise": self.noise.as_dict(),
            "sender_noise": (self.sender_noise or self.noise).as_dict(),
            "receiver_noise": (self.receiver_noise or self.noise).as_dict(),
            "channel_unitaries": None
            if self.channel_unitaries is None
            else [{"real": c.real.tolist(), "imag": c.imag.tolist()} for c in self.channel_unitaries],
            "shots_per_setting": self.shots_per_setting,
            "resamples": self.resamples,
            "seed": self.seed,
            "exact_frequency": self.exact_frequency,
            "analytic": self.analytic,
            "gamma0": self.gamma0,
            "coherence_time_ps": self.coherence_time_ps,
            "delays_ps": self.delays_ps,
        }
        return out


CONFIG_KEYS = set(RunConfig.__dataclass_fields__)


def _noise_from(value, key):
    if value is None:
        return None
    if isinstance(value, chip.NoiseParams):
        return value
    if not isinstance(value, dict):
        raise ConfigError(f"{key} must be an object")
    unknown = set(value) - set(NOISE_KEYS)
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in {key}")
    kwargs = dict(value)
    eps = kwargs.get("crosstalk_epsilon", 0.0)
    if not 0.0 <= float(eps) <= 0.2:
        raise ConfigError(f"{key}.crosstalk_epsilon = {eps} is outside the bound [0, 0.2]")
    gamma = kwargs.get("overlap_gamma")
    if isinstance(gamma, (list, tuple)):
        kwargs["overlap_gamma"] = complex(gamma[0], gamma[1])
    try:
        return chip.NoiseParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _matrix_from(value, key):
    if isinstance(value, np.ndarray):
        return value.astype(complex)
    if isinstance(value, dict) and set(value) == {"real", "imag"}:
        return np.asarray(value["real"], dtype=float) + 1j * np.asarray(value["imag"], dtype=float)
    try:
        return np.asarray(value, dtype=complex)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a matrix") from None


def parse_config(source=None, overrides=None):
    """Build a validated :class:`RunConfig` from a JSON path or dict plus overrides."""
    if source is None:
        data = {}
    elif isinstance(source, dict):
        data = dict(source)
    else:
        with open(source) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})

    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")
    if data.get("experiment") not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {data.get('experiment')!r}")

    for key in ("noise", "sender_noise", "receiver_noise"):
        if key in data:
            data[key] = _noise_from(data[key], key)
    if data.get("noise") is None:
        data.pop("noise", None)
    if data.get("channel_unitaries") is not None:
        mats = [_matrix_from(c, "channel_unitaries") for c in data["channel_unitaries"]]
        if len(mats) != 2 or any(m.shape != (2, 2) for m in mats):
            raise ConfigError("channel_unitaries must hold two 2x2 matrices")
        data["channel_unitaries"] = mats

    cfg = RunConfig(**data)
    _validate(cfg)
    return cfg


def _validate(cfg):
    if cfg.preset is not None and cfg.preset not in chip.PRESET_PHASES:
        raise ConfigError(f"preset {cfg.preset!r} is not one of {list(chip.PRESET_PHASES)}")
    if cfg.experiment == "prepare":
        if cfg.preset is None:
            raise ConfigError("prepare requires 'preset'")
        if cfg.preset not in TARGET_KETS:
            raise ConfigError(f"preset {cfg.preset!r} is a measurement basis, not a state")
    if cfg.experiment == "chip-to-chip" and cfg.preset is not None and cfg.preset not in TARGET_KETS:
        raise ConfigError(f"preset {cfg.preset!r} is a measurement basis, not a state")
    if cfg.experiment == "mle" and cfg.counts is None:
        raise ConfigError("mle requires 'counts'")
    if not isinstance(cfg.shots_per_setting, (int, float)) or cfg.shots_per_setting < 1:
        raise ConfigError(f"shots_per_setting must be >= 1, got {cfg.shots_per_setting}")
    if not isinstance(cfg.resamples, int) or cfg.resamples < 0 or 0 < cfg.resamples < 10:
        raise ConfigError(f"resamples must be 0 or >= 10, got {cfg.resamples}")
    if cfg.seed is not None and (not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2**64):
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {cfg.seed}")
    if cfg.sampling() and cfg.seed is None:
        raise ConfigError("seed is required when sampling is on")
    if not 0.0 <= float(cfg.gamma0) <= 1.0:
        raise ConfigError(f"gamma0 = {cfg.gamma0} is outside the bound [0, 1]")
    if cfg.coherence_time_ps is not None and cfg.coherence_time_ps <= 0:
        raise ConfigError("coherence_time_ps must be positive")
    if cfg.delays_ps is not None and len(cfg.delays_ps) < 5:
        raise ConfigError("delays_ps needs at least 5 points")


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def write_density_matrix(path, rho):
    """4x4 complex matrix as CSV: four ``re`` rows followed by four ``im`` rows."""
    rho = np.asarray(rho, dtype=complex)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("part", "c0", "c1", "c2", "c3"))
        for part, block in (("re", rho.real), ("im", rho.imag)):
            for row in block:
                writer.writerow((part, *("%.17g" % v for v in row)))


def read_density_matrix(path):
    re, im = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for row in reader:
            if not row:
                continue
            values = [float(v) for v in row[1:]]
            (re if row[0].strip() == "re" else im).append(values)
    rho = np.asarray(re) + 1j * np.asarray(im)
    return validate_density_matrix(rho)


def _load_state(ref):
    if ref in TARGET_KETS:
        return target_state(ref)
    return read_density_matrix(ref)


def _write_json(path, payload):
    with open(path, "w") as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True))
        fh.write("\n")


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _noise_pair(cfg):
    return cfg.sender_noise or cfg.noise, cfg.receiver_noise or cfg.noise


def _run_experiment(cfg, out):
    shots = cfg.shots_per_setting
    if cfg.experiment == "calibrate":
        solutions, _ = chip.calibrate_all()
        if not solutions:
            chip.calibrate_conventions()
        payload = {
            "flags": solutions[0][0].as_dict(),
            "solutions": len(solutions),
            "row_fidelities": solutions[0][1],
        }
        _write_json(out / "flags.json", payload)
        return payload

    if cfg.experiment == "hom":
        delays = cfg.delays_ps if cfg.delays_ps is not None else np.linspace(-10.0, 10.0, 41).tolist()
        curve = experiments.run_hom_scan(
            delays,
            gamma0=cfg.gamma0,
            coherence_time=cfg.coherence_time_ps,
            shots=None if cfg.analytic else shots,
            seed=cfg.seed,
        )
        curve.to_csv(out / "hom_curve.csv")
        payload = {"config": cfg.as_dict(), "result": curve.as_dict()}
        _write_json(out / "report.json", payload)
        return payload

    if cfg.experiment == "mle":
        data = CountsDataset.from_csv(cfg.counts)
        rho = mle_reconstruct(data)
        result = {"purity": purity(rho)}
        if cfg.target is not None:
            target = _load_state(cfg.target)
            result["fidelity"] = fidelity(rho, target)
            if cfg.resamples:
                boot = bootstrap_errors(data, target, cfg.resamples, cfg.seed)
                result["sigma_fidelity"] = boot.sigma_fidelity
                result["sigma_purity"] = boot.sigma_purity
        result["state"] = {"real": rho.real.tolist(), "imag": rho.imag.tolist()}
        write_density_matrix(out / "rho.csv", rho)
        payload = {"config": cfg.as_dict(), "result": result}
        _write_json(out / "report.json", payload)
        return payload

    sender, receiver = _noise_pair(cfg)
    common = dict(shots=shots, resamples=cfg.resamples, seed=cfg.seed, exact_frequency=cfg.exact_frequency)
    if cfg.experiment == "prepare":
        report = experiments.run_state_prep_experiment(cfg.preset, noise=cfg.noise, **common)
    elif cfg.experiment == "tomo-onchip":
        state = _load_state(cfg.input_state) if cfg.input_state else None
        report = experiments.run_onchip_tomography(state, receiver_noise=receiver, **common)
    else:
        report = experiments.run_chip_to_chip(
            cfg.preset or "Cluster",
            sender_noise=sender,
            channel_unitaries=cfg.channel_unitaries,
            receiver_noise=receiver,
            **common,
        )
    write_density_matrix(out / "rho.csv", report.state)
    CountsDataset(report.extras["counts"], shots).to_csv(out / "counts.csv")
    payload = {"config": cfg.as_dict(), "result": report.as_dict()}
    _write_json(out / "report.json", payload)
    return payload


def run(cfg):
    """Execute a configuration; returns the process exit code."""
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        payload = _run_experiment(cfg, out)
    except (MLEConvergenceError, NoConsistentConventionError, DegeneratePostselectionError, BootstrapError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ConfigError, KeyError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_CONFIG
    result = payload.get("result", payload)
    summary = {k: result[k] for k in ("fidelity", "purity", "fitted_visibility") if k in result}
    log.info("%s done -> %s %s", cfg.experiment, out, summary)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="photonode", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--exact-frequency", action="store_true", default=None,
                        help="use expected counts instead of Poisson samples")
    common.add_argument("--out", dest="output_dir", help="output directory")
    common.add_argument("--preset", help="preset name")
    common.add_argument("--counts", help="counts CSV (mle)")
    common.add_argument("--target", help="target density-matrix CSV or named state")
    common.add_argument("--input-state", help="input density-matrix CSV or named state (tomo-onchip)")
    common.add_argument("--shots", dest="shots_per_setting", type=int)
    common.add_argument("--resamples", type=int)
    common.add_argument("--epsilon", type=float, help="2DGC crosstalk probability on every coupler")
    common.add_argument("--gamma0", type=float, help="peak photon overlap (hom)")
    common.add_argument("--analytic", action="store_true", default=None, help="exact HOM curve")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("config", "epsilon", "verbose") and v is not None
    }
    try:
        if args.config is not None:
            with open(args.config) as fh:
                base = json.load(fh)
        else:
            base = {}
        if args.epsilon is not None:
            noise = dict(base.get("noise") or {})
            noise["crosstalk_epsilon"] = args.epsilon
            base["noise"] = noise
        cfg = parse_config(base, overrides)
    except (ConfigError, json.JSONDecodeError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
