"""Experiment orchestration: config parsing, seed management, CSV emission.

Subcommands: generate, estimate-z, fluctuation, tilt-experiment,
rotation-test, kernel-check, theory, covariance, validate.  Configuration
comes from a flat key=value file (unknown keys rejected); ``--seed``
overrides the file's master seed, ``--threads`` the worker count (default
from TRAPWALK_THREADS), ``--out`` the output directory.  Identical
(config, seed) pairs produce byte-identical CSV artifacts.

Exit codes: 0 ok, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import MODULE_VERSIONS, __version__, acceptance, kernels
from .exponents import (ExponentInput, analytic_covariance, bar_xi,
                        feasibility, lower_bound_exponent, mc_covariance,
                        p2p_bound, sup_feasible_xi)
from .field import FieldError, ModelParams, save_field, sample_field
from .rng import split_seed, substream
from .sampler import (BALL, HYPERPLANE, PathConfig, SamplerError,
                      estimate_Z, measure_fluctuation,
                      rotation_exchange_test, tube_window)
from .tilt import (TiltError, TiltSpec, paired_tilt_comparison,
                   predicted_gain_exponent, rn_derivative, sample_tilt)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2

THREADS_ENV = "TRAPWALK_THREADS"

MODES = {"point_to_plane": HYPERPLANE, "point_to_point": BALL}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment description; see DEFAULTS for the file keys."""

    model: ModelParams
    mode: str
    L_grid: tuple[float, ...]
    xi: float
    dt: float
    drift: float | None
    max_steps: int | None
    n_paths: int
    fields_per_point: int
    replicas: int
    master_seed: int
    output_path: str
    with_traps: bool

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {sorted(MODES)}")
        if not self.L_grid:
            raise ConfigError("L_grid must be nonempty")
        if list(self.L_grid) != sorted(self.L_grid) or len(set(self.L_grid)) != len(self.L_grid):
            raise ConfigError("L_grid must be strictly increasing")
        if not 0 < self.xi < 1:
            raise ConfigError("xi must lie in (0, 1)")
        if self.n_paths < 1 or self.fields_per_point < 1 or self.replicas < 1:
            raise ConfigError("n_paths, n_fields, replicas must be >= 1")

    def path_config(self, L: float) -> PathConfig:
        return PathConfig(L=L, xi=self.xi, dt=self.dt, drift=self.drift,
                          max_steps=self.max_steps, target=MODES[self.mode])


DEFAULTS: dict[str, str] = {
    "mode": "point_to_plane",
    "d": "2",
    "alpha": "2.0",
    "gamma": "1.0",
    "lambda": "0.5",
    "r_max": "32.0",
    "L_grid": "8,16,32",
    "xi": "0.6",
    "dt": "0.01",
    "drift": "auto",
    "max_steps": "auto",
    "n_paths": "2000",
    "n_fields": "1",
    "replicas": "1",
    "master_seed": "0",
    "traps": "on",
    "out": ".",
}


def parse_config_text(text: str) -> dict[str, str]:
    values = dict(DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = val.strip()
    return values


def build_config(values: dict[str, str]) -> ExperimentConfig:
    try:
        model = ModelParams(
            d=int(values["d"]),
            alpha=float(values["alpha"]),
            gamma=float(values["gamma"]),
            lam=float(values["lambda"]),
            r_max=float(values["r_max"]),
        )
        drift = None if values["drift"] == "auto" else float(values["drift"])
        max_steps = (None if values["max_steps"] == "auto"
                     else int(values["max_steps"]))
        grid = tuple(float(v) for v in values["L_grid"].split(",") if v.strip())
        traps = values["traps"].lower()
        if traps not in ("on", "off"):
            raise ConfigError("traps must be 'on' or 'off'")
        return ExperimentConfig(
            model=model,
            mode=values["mode"],
            L_grid=grid,
            xi=float(values["xi"]),
            dt=float(values["dt"]),
            drift=drift,
            max_steps=max_steps,
            n_paths=int(values["n_paths"]),
            fields_per_point=int(values["n_fields"]),
            replicas=int(values["replicas"]),
            master_seed=int(values["master_seed"]),
            output_path=values["out"],
            with_traps=traps == "on",
        )
    except (ValueError, FieldError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path: str | None, overrides: dict[str, str]) -> ExperimentConfig:
    if path is None:
        values = dict(DEFAULTS)
    else:
        with open(path) as fh:
            values = parse_config_text(fh.read())
    values.update(overrides)
    return build_config(values)


def write_manifest(out_dir: str, name: str, values: dict[str, str],
                   seed: int) -> None:
    path = os.path.join(out_dir, f"manifest_{name}.txt")
    with open(path, "w") as fh:
        fh.write(f"subcommand={name}\n")
        fh.write(f"trapwalk_version={__version__}\n")
        for mod in sorted(MODULE_VERSIONS):
            fh.write(f"module_{mod}={MODULE_VERSIONS[mod]}\n")
        fh.write(f"master_seed={seed}\n")
        for key in sorted(values):
            fh.write(f"{key}={values[key]}\n")


def write_csv(out_dir: str, name: str, header: list[str],
              rows: list[list]) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, float) else str(v)
                              for v in row) + "\n")
    return path


def _field_for(cfg: ExperimentConfig, L: float, field_index: int):
    window = tube_window(L, cfg.xi, cfg.model.d)
    if not cfg.with_traps:
        from .field import TrapField
        return TrapField.empty(cfg.model, window, seed=0)
    seed = int(substream(cfg.master_seed, 1, int(L * 1000), field_index)
               .integers(2 ** 62))
    return sample_field(cfg.model, window, seed)


# -- subcommands -------------------------------------------------------------


def cmd_generate(cfg: ExperimentConfig, out: str, threads: int) -> int:
    for L in cfg.L_grid:
        for f in range(cfg.fields_per_point):
            fld = _field_for(cfg, L, f)
            path = os.path.join(out, f"field_L{L:g}_f{f}.txt")
            save_field(fld, path)
            print(f"wrote {path} ({fld.n_traps} traps)")
    return EXIT_OK


def cmd_estimate_z(cfg: ExperimentConfig, out: str, threads: int) -> int:
    rows = []
    for li, L in enumerate(cfg.L_grid):
        pcfg = cfg.path_config(L)
        for f in range(cfg.fields_per_point):
            fld = _field_for(cfg, L, f)
            pseed = int(substream(cfg.master_seed, 2, li, f).integers(2 ** 62))
            for event in ("ALL", "A", "B"):
                est = estimate_Z(fld, pcfg, cfg.n_paths, event, seed=pseed,
                                 threads=threads)
                rows.append([L, cfg.xi, event, est.mean, est.stderr, est.n,
                             est.ess, cfg.dt, pseed])
    path = write_csv(out, "estimate_z.csv",
                     ["L", "xi", "event", "mean", "stderr", "n", "ess",
                      "dt", "seed"], rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_fluctuation(cfg: ExperimentConfig, out: str, threads: int) -> int:
    rep = measure_fluctuation(
        cfg.model, list(cfg.L_grid), cfg.xi, cfg.n_paths, cfg.master_seed,
        fields_per_point=cfg.fields_per_point, with_traps=cfg.with_traps,
        dt=cfg.dt, drift=cfg.drift, threads=threads)
    rows = [[r.L, r.mean_log_trans, r.stderr] for r in rep.rows]
    rows.append(["slope", rep.slope, rep.slope_stderr])
    path = write_csv(out, "fluctuation.csv",
                     ["L", "weighted_mean_log_transmax", "stderr"], rows)
    print(f"wrote {path}; slope={rep.slope:.4f} +- {rep.slope_stderr:.4f} "
          f"CI [{rep.slope_ci[0]:.4f}, {rep.slope_ci[1]:.4f}]")
    return EXIT_OK


def cmd_tilt_experiment(cfg: ExperimentConfig, out: str, threads: int) -> int:
    rows = []
    for li, L in enumerate(cfg.L_grid):
        spec = TiltSpec(L=L, xi=cfg.xi, params=cfg.model,
                        mode=MODES[cfg.mode])
        if cfg.model.r_max < spec.radius_band[1]:
            raise ConfigError(
                f"r_max={cfg.model.r_max:g} must cover the tilt band top "
                f"{spec.radius_band[1]:g} at L={L:g}")
        rn = np.empty(cfg.fields_per_point * cfg.replicas)
        k = 0
        for f in range(rn.shape[0]):
            fld = _field_for(cfg, L, f)
            rn[k] = rn_derivative(fld, spec)
            k += 1
        pcfg = cfg.path_config(L)
        fld = _field_for(cfg, L, 0)
        pseed = int(substream(cfg.master_seed, 3, li).integers(2 ** 62))
        paired = paired_tilt_comparison(fld, spec, pcfg, cfg.n_paths,
                                        seed=pseed, tilt_seed=li + 1,
                                        threads=threads)
        rows.append([
            L, cfg.xi, spec.lambda_hat,
            float(rn.mean()), float(rn.std(ddof=1) / math.sqrt(len(rn))),
            paired.log_diff, paired.log_diff_stderr,
            predicted_gain_exponent(spec),
        ])
    path = write_csv(out, "tilt_experiment.csv",
                     ["L", "xi", "lambda_hat", "rn_mean", "rn_stderr",
                      "logdiff_mean", "logdiff_stderr", "predicted_exponent"],
                     rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_rotation_test(cfg: ExperimentConfig, out: str, threads: int) -> int:
    rows = []
    for L in cfg.L_grid:
        rep = rotation_exchange_test(
            cfg.model, L, cfg.xi, N=max(cfg.replicas, 1),
            n_fields=cfg.fields_per_point, n_paths=cfg.n_paths,
            master_seed=cfg.master_seed, dt=cfg.dt, drift=cfg.drift,
            threads=threads)
        rows.append([L, cfg.xi, rep.theta, rep.n_rotations, rep.n_fields,
                     rep.center_max_freq, rep.expected_freq, rep.sigma,
                     rep.zscore, rep.n_ties])
    path = write_csv(out, "rotation_test.csv",
                     ["L", "xi", "theta", "n_rotations", "n_fields",
                      "center_max_freq", "expected_freq", "sigma", "zscore",
                      "n_ties"], rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_kernel_check(cfg: ExperimentConfig, out: str, threads: int) -> int:
    rng = split_seed(cfg.master_seed, 0)
    checks = []

    n = 1000
    fail_up = fail_low = 0
    for _ in range(n):
        x = float(rng.uniform(-0.5, 0.5))
        y = float(rng.uniform(-0.5, 0.5))
        t = float(rng.uniform(0.02, 5.0))
        rep = kernels.kernel_bounds_check(kernels.KernelQuery((x,), (y,), t), 1.0)
        if not rep.upper_ok:
            fail_up += 1
        if rep.lower_ok is False:
            fail_low += 1
    checks.append(["upper_bound_width1", n, fail_up, fail_up == 0])
    checks.append(["lower_bound_width1_t>=2", n, fail_low, fail_low == 0])

    fail_sym = 0
    for _ in range(200):
        q = kernels.KernelQuery(
            tuple(rng.uniform(-0.45, 0.45, 2)), tuple(rng.uniform(-0.45, 0.45, 2)),
            float(rng.uniform(0.05, 2.0)))
        q_rev = kernels.KernelQuery(q.y, q.x, q.t)
        a = kernels.dirichlet_kernel_box(q, 1.0, 2)
        b = kernels.dirichlet_kernel_box(q_rev, 1.0, 2)
        if abs(a - b) > 1e-12:
            fail_sym += 1
    checks.append(["box_symmetry", 200, fail_sym, fail_sym == 0])

    val = kernels.hitting_time_cdf(1.0, 1.0)
    ok = abs(val - 0.317311) <= 1e-6
    checks.append(["hitting_cdf_value", 1, 0 if ok else 1, ok])

    rows = [[name, n_, f_, "pass" if ok_ else "fail"]
            for name, n_, f_, ok_ in checks]
    path = write_csv(out, "kernel_check.csv",
                     ["check", "n", "failures", "status"], rows)
    print(f"wrote {path}")
    return EXIT_OK if all(c[3] for c in checks) else EXIT_VALIDATION


def cmd_theory(cfg: ExperimentConfig, out: str, threads: int) -> int:
    m = cfg.model
    inp = ExponentInput(m.d, m.alpha, m.gamma)
    rows = [
        ["bar_xi", bar_xi(inp)],
        ["lower_bound_exponent", lower_bound_exponent(inp)],
        ["sup_feasible_xi", sup_feasible_xi(inp)],
        ["p2p_bound", p2p_bound(inp)],
        ["feasible_at_config_xi",
         float(all(feasibility(inp, cfg.xi)))],
    ]
    for name, value in rows:
        print(f"{name} = {value:.12g}")
    path = write_csv(out, "theory.csv", ["quantity", "value"], rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_covariance(cfg: ExperimentConfig, out: str, threads: int) -> int:
    rows = []
    s_grid = list(cfg.L_grid)
    for s in s_grid:
        ref = analytic_covariance(cfg.model, s)
        if cfg.fields_per_point > 1:
            est = mc_covariance(cfg.model, s, cfg.fields_per_point,
                                master_seed=cfg.master_seed)
            rows.append([s, ref, est.mean, est.stderr, est.n])
        else:
            rows.append([s, ref, "", "", 0])
    path = write_csv(out, "covariance.csv",
                     ["s", "analytic", "mc_mean", "mc_stderr", "n_fields"],
                     rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_validate(cfg: ExperimentConfig, out: str, threads: int) -> int:
    results = acceptance.run_all(threads=threads)
    rows = []
    hard_fail = False
    for res in results:
        print(res.line())
        rows.append([res.name, "pass" if res.passed else "fail",
                     "hard" if res.hard else "diagnostic", res.detail])
        if res.hard and not res.passed:
            hard_fail = True
    write_csv(out, "validate.csv", ["criterion", "status", "kind", "detail"],
              rows)
    return EXIT_VALIDATION if hard_fail else EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "estimate-z": cmd_estimate_z,
    "fluctuation": cmd_fluctuation,
    "tilt-experiment": cmd_tilt_experiment,
    "rotation-test": cmd_rotation_test,
    "kernel-check": cmd_kernel_check,
    "theory": cmd_theory,
    "covariance": cmd_covariance,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="trapwalk",
        description="Monte Carlo experiments for Brownian motion in a "
                    "heavy-tailed Poissonian trap potential",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--seed", type=int, help="override master_seed")
    parser.add_argument("--threads", type=int,
                        help=f"worker threads (default ${THREADS_ENV} or 1)")
    parser.add_argument("--out", help="output directory (default from config)")
    args = parser.parse_args(argv)

    threads = args.threads
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    if threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = str(args.seed)
    if args.out is not None:
        overrides["out"] = args.out
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, FieldError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = cfg.output_path
    os.makedirs(out, exist_ok=True)
    try:
        echo = dict(DEFAULTS)
        if args.config:
            with open(args.config) as fh:
                echo = parse_config_text(fh.read())
        echo.update(overrides)
        write_manifest(out, args.command, echo, cfg.master_seed)
        return COMMANDS[args.command](cfg, out, threads)
    except (ConfigError, FieldError, SamplerError, TiltError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
