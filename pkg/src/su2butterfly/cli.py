"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 computation error,
4 I/O error, 5 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .errors import ButterflyError, ConfigError
from .floquet import FOUR_PI, ModelParams, Rational, bch_rhs, build_floquet, build_kicked_top, first_three_factors, parity_blocks
from .io import (
    Table,
    butterfly_table,
    cache_dir,
    cache_lookup,
    cache_store,
    config_hash,
    params_to_dict,
    parse,
    render,
    render_json,
    atomic_write_text,
)
from .spectrum import TWO_PI, butterfly_scan, eigenphases, floquet_spectrum, symmetry_check, uniform_grid
from .su2 import parity_decompose

log = logging.getLogger("su2butterfly")

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_IO, EXIT_VERIFY = 0, 2, 3, 4, 5

COMMANDS = ("butterfly", "dq", "crossings", "classical", "evolve-fft", "verify")


@dataclass
class RunConfig:
    command: str
    model: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    execution: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def cache_key(self) -> str:
        # output location and worker count do not change the data
        d = asdict(self)
        d.pop("output")
        d["execution"] = {k: v for k, v in d["execution"].items() if k not in ("threads", "cache_dir")}
        d["engine"] = __version__
        return config_hash(d)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _model_args(p, heta=True, heta_range=False):
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--alpha-scaled", type=float, default=1.0)
    if heta:
        p.add_argument("--heta", type=float, default=0.0)
    if heta_range:
        p.add_argument("--heta-min", type=float, default=0.0)
        p.add_argument("--heta-max", type=float, default=FOUR_PI)
        p.add_argument("--steps", type=int, default=2048)
    p.add_argument("--variant", choices=("XX", "XY"), default="XX")
    p.add_argument("--nu", type=int)
    p.add_argument("--mu", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="su2butterfly", description="Floquet butterfly spectra of driven SU(2) systems")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--output", "-o", help="output path (stdout if omitted)")
        p.add_argument("--format", choices=("tsv", "json"), default="tsv")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--rng-seed", type=int, default=0)
        p.add_argument("--cache-dir")

    p = sub.add_parser("butterfly", help="eigenphases over a heta grid")
    _model_args(p, heta=False, heta_range=True)
    common(p)

    p = sub.add_parser("dq", help="generalized dimensions of one spectrum")
    _model_args(p)
    p.add_argument("--operator", choices=("floquet", "kicked-top"), default="floquet")
    p.add_argument("--combined", action="store_true", help="pool both parity sectors")
    p.add_argument("--domain", choices=("support", "circle"), default="support")
    common(p)

    p = sub.add_parser("crossings", help="level crossings over [0, 4pi)")
    _model_args(p, heta=False)
    p.add_argument("--sector", default="all")
    p.add_argument("--density", type=float, default=10.0)
    p.add_argument("--tau-true", type=float, default=1e-10)
    common(p)

    p = sub.add_parser("classical", help="Poincare section of the mean-field map")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--variant", choices=("XX", "XY"), default="XX")
    p.add_argument("--torsion-sign", type=int, choices=(1, -1))
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--n-steps", type=int, default=10_000)
    common(p)

    p = sub.add_parser("evolve-fft", help="FFT of the autocorrelation of |m0>")
    _model_args(p)
    p.add_argument("--m0", type=float, required=True)
    p.add_argument("--n-seq", type=int, default=1024)
    p.add_argument("--window", choices=("hann",))
    p.add_argument("--pad", action="store_true")
    p.add_argument("--amplitude", action="store_true", help="emit |FFT| instead of power")
    common(p)

    p = sub.add_parser("verify", help="run the exact-identity verification suite")
    _model_args(p, heta=False)
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--rng-seed", type=int, default=0)
    return parser


def _model_from_args(a) -> ModelParams:
    pre = None
    if (a.nu is None) != (a.mu is None):
        raise ConfigError("--nu and --mu must be given together")
    try:
        if a.nu is not None:
            pre = Rational(a.nu, a.mu)
        return ModelParams(a.J, a.alpha_scaled, getattr(a, "heta", 0.0), a.variant, pre)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def config_from_args(a) -> RunConfig:
    model = {}
    if hasattr(a, "J"):
        model = params_to_dict(_model_from_args(a))
    skip = {"command", "output", "format", "threads", "rng_seed", "cache_dir"}
    if model:
        skip |= {"J", "alpha_scaled", "heta", "variant", "nu", "mu"}
    options = {k: v for k, v in vars(a).items() if k not in skip}
    execution = {"threads": getattr(a, "threads", 1), "rng_seed": getattr(a, "rng_seed", 0), "cache_dir": getattr(a, "cache_dir", None)}
    output = {"path": getattr(a, "output", None), "format": getattr(a, "format", "tsv")}
    if a.command == "butterfly":
        if a.steps < 1:
            raise ConfigError("--steps must be >= 1")
        if not a.heta_min < a.heta_max:
            raise ConfigError("--heta-min must be below --heta-max")
    if execution["threads"] is not None and execution["threads"] < 1:
        raise ConfigError("--threads must be >= 1")
    return RunConfig(a.command, model, options, execution, output)


# ---------------------------------------------------------------- commands


def _run_butterfly(cfg: RunConfig, p: ModelParams) -> Table:
    o = cfg.options
    grid = uniform_grid(o["steps"], o["heta_min"], o["heta_max"])
    ds = butterfly_scan(p, grid, workers=cfg.execution["threads"])
    return butterfly_table(ds, {"rng_seed": cfg.execution["rng_seed"]})


def _run_dq(cfg: RunConfig, p: ModelParams) -> Table:
    from .fractal import sector_dq
    from .spectrum import EVEN, ODD, merge_sets

    o = cfg.options
    if o["operator"] == "kicked-top":
        U = build_kicked_top(p)
        d = parity_decompose(p.basis)
        even, odd = parity_blocks(U, d)
        spec = merge_sets([eigenphases(even, parity=EVEN), eigenphases(odd, parity=ODD)], False)
    else:
        spec = floquet_spectrum(p)
    curves = sector_dq(spec, combined=o["combined"], domain=o["domain"])
    rows = []
    for name in sorted(curves):
        c = curves[name]
        for q, D, r2, se in zip(c.q_values, c.D_q, c.fit_r2, c.fit_stderr):
            rows.append((name, q, D, r2, se))
    return Table("dq", {"params": params_to_dict(p), "engine": __version__, "operator": o["operator"]}, rows)


def _run_crossings(cfg: RunConfig, p: ModelParams) -> Table:
    from .crossings import find_crossings

    o = cfg.options
    search = find_crossings(p, sector=o["sector"], density=o["density"], tau_true=o["tau_true"])
    rows = [(r.heta_star, r.kind, ",".join(r.sector_pair), r.gap_bound) for r in search.records]
    rows.sort(key=lambda r: (r[0], r[2], r[1]))
    meta = {"params": params_to_dict(p), "engine": __version__, "grid_size": search.grid_size}
    return Table("crossings", meta, rows)


def _run_classical(cfg: RunConfig) -> Table:
    from .classical import DEFAULT_TORSION_SIGN, ClassicalParams, orbit, random_seeds

    o = cfg.options
    sign = o["torsion_sign"] or DEFAULT_TORSION_SIGN
    try:
        cp = ClassicalParams(o["alpha"], o["eta"], sign, o["variant"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if o["seeds"] < 1 or o["n_steps"] < 1:
        raise ConfigError("--seeds and --n-steps must be >= 1")
    seed = cfg.execution["rng_seed"]
    seeds = random_seeds(o["seeds"], seed)
    rows = []
    for k, s in enumerate(seeds):
        orb = orbit(s, cp, o["n_steps"])
        for step in np.flatnonzero(orb[:, 0] > 0):
            rows.append((k, int(step) + 1, orb[step, 1], orb[step, 2]))
    meta = {
        "classical": {"alpha": cp.alpha, "eta": cp.eta, "torsion_sign": cp.torsion_sign, "variant": cp.variant},
        "rng_seed": seed,
        "engine": __version__,
    }
    return Table("section", meta, rows)


def _run_fft(cfg: RunConfig, p: ModelParams) -> Table:
    from .dynamics import autocorrelation, fft_spectrum

    o = cfg.options
    try:
        k = p.basis.index(o["m0"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    phi = np.zeros(p.basis.dim, dtype=complex)
    phi[k] = 1.0
    seq = autocorrelation(build_floquet(p), phi, o["n_seq"])
    spec = fft_spectrum(seq, pad=o["pad"], window=o["window"])
    values = spec.amplitude if o["amplitude"] else spec.power
    rows = [(p.heta, e, v) for e, v in zip(spec.phases, values)]
    meta = {"params": params_to_dict(p), "engine": __version__, "m0": o["m0"], "quantity": "amplitude" if o["amplitude"] else "power"}
    return Table("fft", meta, rows)


# ---------------------------------------------------------------- verify


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    detail: str = ""


def verify_suite(J, alpha_scaled: float = 1.0, samples: int = 5, rng_seed: int = 0) -> list:
    """Exact identities: 4pi periodicity, reflection about 2pi, the
    three-factor closed form, the 2pi collapse and the J=2 crossings."""
    from .crossings import find_crossings

    rng = np.random.default_rng(rng_seed)
    p = ModelParams(J, alpha_scaled)
    hetas = list(rng.uniform(0, FOUR_PI, samples))
    out = []
    for mode in ("periodicity", "reflection"):
        r = symmetry_check(p, mode, hetas)
        out.append(CheckResult(mode, r.passed, r.max_deviation))
    worst = 0.0
    for h in hetas:
        q = p.with_heta(h)
        worst = max(worst, float(np.abs(first_three_factors(q) - bch_rhs(q)).max()))
    out.append(CheckResult("three-factor identity", worst <= 1e-11, worst))
    r = symmetry_check(p, "collapse")
    if p.basis.is_integer:
        out.append(CheckResult("collapse at 2pi", r.max_deviation <= 1e-10, r.max_deviation))
    else:
        out.append(CheckResult("no collapse (half-integer J)", r.max_deviation >= 0.1, r.max_deviation))

    two = ModelParams(2, alpha_scaled, TWO_PI / 3)
    _, odd = parity_blocks(build_floquet(two), parity_decompose(two.basis))
    dev = float(np.abs(odd - np.eye(odd.shape[0])).max())
    out.append(CheckResult("J=2 odd block is identity at 2pi/3", dev <= 1e-12, dev))
    expect = {"odd": [2 / 3, 2, 10 / 3], "even": [2]}
    for sector, want in expect.items():
        recs = [x for x in find_crossings(two, sector=sector).records if x.is_true]
        got = sorted(x.heta_star / math.pi for x in recs)
        err = max((abs(a - b) for a, b in zip(got, want)), default=math.inf) if len(got) == len(want) else math.inf
        out.append(CheckResult(f"J=2 {sector}-sector crossings", err <= 1e-9, err, "at " + ", ".join(f"{g:.12g}" for g in got) + " pi"))
    return out


# ---------------------------------------------------------------- dispatch


def run_command(cfg: RunConfig) -> int:
    if cfg.command == "verify":
        o = cfg.options
        results = verify_suite(cfg.model["J"], cfg.model["alpha_scaled"], o["samples"], cfg.execution["rng_seed"])
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.value:.3e}) {r.detail}".rstrip())
        return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY

    directory = cache_dir(cfg.execution.get("cache_dir"))
    key = cfg.cache_key()
    text = cache_lookup(directory, key)
    if text is not None:
        log.info("cache hit %s", key[:12])
        table = parse(text)
    else:
        p = None
        if cfg.model:
            from .io import params_from_dict

            p = params_from_dict(cfg.model)
        if cfg.command == "butterfly":
            table = _run_butterfly(cfg, p)
        elif cfg.command == "dq":
            table = _run_dq(cfg, p)
        elif cfg.command == "crossings":
            table = _run_crossings(cfg, p)
        elif cfg.command == "classical":
            table = _run_classical(cfg)
        elif cfg.command == "evolve-fft":
            table = _run_fft(cfg, p)
        else:
            raise ConfigError(f"unknown command {cfg.command!r}")
        table.meta["config_hash"] = key
        text = render(table)
        cache_store(directory, key, text)

    if cfg.output["format"] == "json":
        text = render_json(table)
    if cfg.output["path"]:
        atomic_write_text(cfg.output["path"], text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv: Optional[list] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ConfigError(f"a command is required: {', '.join(COMMANDS)}")
        cfg = config_from_args(args)
        return run_command(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ButterflyError as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
