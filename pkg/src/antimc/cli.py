"""Command-line front end.

    antimc price --payoff asian --method static --antithetic minus-identity --n 35000
    antimc anneal --payoff covswap --iters 10000 --save-matrix astar.txt
    antimc probe --payoff covswap --antithetic minus-identity
    antimc reproduce-table1 --seed 1
    antimc export-matrix --antithetic minus-identity --dim 12 --output m.txt
    antimc import-matrix m.txt

Settings resolve as built-in defaults < ``--config`` file < flags. The seed
falls back to ``ANTIMC_SEED`` when neither file nor flag sets it. The config
file holds one ``key = value`` per line using the :class:`RunConfig` field
names; lines starting with ``#`` are comments. Exit status: 0 ok, 2 bad
configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, anneal, estimate, lie
from . import payoff as payoffs
from .errors import ConfigError, DomainError, NumericError, UsageError
from .matrixio import export_matrix, import_matrix
from .sampling import RNG_DESCRIPTION, GaussianStream

PAYOFFS = ("asian", "covswap")
METHODS = ("crude", "static", "dynamic", "anneal")
PROBE_DEFAULT_N = 100_000


def _parse_times(text):
    if isinstance(text, (tuple, list)):
        return tuple(float(t) for t in text)
    return tuple(float(t) for t in str(text).replace(";", ",").split(",") if t.strip())


def _parse_bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PARSERS = {"int": int, "float": float, "bool": _parse_bool, "str": str, "tuple": _parse_times}


@dataclass
class RunConfig:
    payoff: str = "asian"
    method: str = "crude"
    antithetic_init: str = "minus-identity"
    n_samples: int = 0  # 0: infer from the error column of the matching table
    # Asian call
    spot: float = 100.0
    strike: float = 100.0
    vol: float = 0.1036
    # covariance swap
    vol1: float = 0.1736
    vol2: float = 0.1012
    dividend: float = 0.0203
    scale: float = 100.0
    normalize: bool = False
    # shared market data
    rate: float = 0.0283
    times: tuple = field(default_factory=payoffs.monthly_times)
    # annealing
    gamma: float = 0.5
    heat: str = "pilot"
    pilot_n: int = 20_000
    iters: int = 10_000
    variant: str = "power"
    b: float = 1.0
    noise: bool = True
    seed: int = 0
    threads: int = 1
    output: str = "-"

    def with_updates(self, updates):
        """Copy with string or typed values applied; unknown keys are rejected."""
        out = dataclasses.replace(self)
        types = {f.name: f.type for f in dataclasses.fields(self)}
        for key, raw in updates.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}", key)
            try:
                val = _PARSERS[types[key]](raw)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}", key) from exc
            setattr(out, key, val)
        return out

    def validate(self):
        if self.payoff not in PAYOFFS:
            raise ConfigError(f"payoff must be one of {PAYOFFS}, got {self.payoff!r}", "payoff")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}", "method")
        if self.variant not in anneal.VARIANTS:
            raise ConfigError(f"variant must be one of {anneal.VARIANTS}", "variant")
        for name in ("spot", "strike", "scale", "b"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive", name)
        for name in ("vol", "vol1", "vol2"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be non-negative", name)
        if not 0 < self.gamma < 1:
            raise ConfigError("gamma must lie in (0, 1)", "gamma")
        if self.n_samples < 0 or self.n_samples == 1:
            raise ConfigError("n_samples must be >= 2, or 0 to infer it", "n_samples")
        if self.iters < 1:
            raise ConfigError("iters must be >= 1", "iters")
        if self.pilot_n < 100:
            raise ConfigError("pilot_n must be >= 100", "pilot_n")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1", "threads")
        t = self.times
        if len(t) == 0 or t[0] <= 0 or any(b <= a for a, b in zip(t, t[1:])):
            raise ConfigError("times must be positive and strictly increasing", "times")
        if self.payoff == "covswap" and len(t) % 2:
            raise ConfigError("covswap needs an even number of times", "times")
        if self.heat != "pilot":
            try:
                h = float(self.heat)
            except ValueError as exc:
                raise ConfigError("heat must be 'pilot' or a positive number", "heat") from exc
            if not h > 0:
                raise ConfigError("heat must be positive", "heat")
        return self

    def canonical(self):
        """Stable text form hashed into the CSV header; output and threads do not affect results."""
        items = dataclasses.asdict(self)
        del items["output"], items["threads"]
        return "\n".join(f"{k}={items[k]!r}" for k in sorted(items))

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def build_payoff(self):
        try:
            if self.payoff == "asian":
                spec = payoffs.AsianSpec(self.spot, self.strike, self.rate, self.vol, self.times)
                return payoffs.asian_payoff(spec)
            spec = payoffs.CovSwapSpec(self.vol1, self.vol2, self.rate, self.dividend, self.times,
                                       self.scale, self.normalize)
            return payoffs.covswap_payoff(spec)
        except DomainError as exc:
            raise ConfigError(str(exc), "payoff") from exc


def read_config_file(path):
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", "config") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value", "config")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def resolve_matrix(spec, dim):
    """Named starting matrix or a matrix file.

    ``reflection`` is diag(-1, 1, ..., 1), a start in the det = -1 component;
    annealing never leaves the component of its starting point.
    """
    if spec == "minus-identity":
        return -np.eye(dim)
    if spec == "identity":
        return np.eye(dim)
    if spec == "reflection":
        A = np.eye(dim)
        A[0, 0] = -1.0
        return A
    A = import_matrix(spec)
    if A.shape[0] != dim:
        raise ConfigError(f"matrix in {spec} is {A.shape[0]}x{A.shape[0]}, payoff needs {dim}", "antithetic_init")
    return A


# Reference rows as (label, variance, MC error); n is inferred as variance / error^2.
TABLES = {
    1: ("asian", (("crude", 17.25, 0.01), ("antithetic -Id", 3.50, 0.01), ("antithetic A*", 3.60, 0.01))),
    2: ("covswap", (("crude", 0.081, 0.001), ("antithetic -Id", 0.081, 0.001), ("antithetic A*", 0.029, 0.001))),
}


def inferred_n(variance, error):
    return int(round(variance / error**2))


def default_n(cfg):
    rows = TABLES[1 if cfg.payoff == "asian" else 2][1]
    if cfg.method == "crude":
        row = rows[0]
    elif cfg.method == "anneal" or cfg.antithetic_init != "minus-identity":
        row = rows[2]
    else:
        row = rows[1]
    return inferred_n(row[1], row[2])


def make_schedule(cfg, pm, stream):
    heat = anneal.heat_from_pilot(pm, cfg.pilot_n, stream) if cfg.heat == "pilot" else float(cfg.heat)
    return anneal.AnnealSchedule(gamma=cfg.gamma, heat=heat, variant=cfg.variant, b=cfg.b, noise=cfg.noise)


def header_lines(cfg, extra=()):
    return [
        f"# antimc {__version__}",
        f"# seed={cfg.seed} config_hash={cfg.digest()}",
        f"# rng={RNG_DESCRIPTION}",
        *(f"# {e}" for e in extra),
    ]


def render_csv(header, reports, timing=False):
    buf = io.StringIO()
    buf.writelines(line + "\n" for line in header)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(estimate.CSV_COLUMNS)
    for rep in reports:
        w.writerow(rep.row(timing=timing))
    return buf.getvalue()


def _anneal_notes(res):
    return [
        f"schedule: {res.schedule.describe()}",
        f"anneal: iters={res.state.n} rejections={res.rejections} penalty_hits={res.penalty_hits} "
        f"final_norm_Y={lie.norm(res.state.Y)!r}",
    ]


def run_anneal(cfg, save_matrix=None, trace_path=None):
    """Anneal from ``cfg.antithetic_init``; the stream layout matches :func:`run_price`."""
    pm = cfg.build_payoff()
    main, pilot = GaussianStream(cfg.seed).split(2)
    A0 = resolve_matrix(cfg.antithetic_init, pm.dim)
    sched = make_schedule(cfg, pm, pilot)
    res = anneal.run(pm, sched, A0, cfg.iters, main)
    if save_matrix:
        export_matrix(res.A_star, save_matrix)
    if trace_path:
        buf = io.StringIO()
        buf.writelines(line + "\n" for line in header_lines(cfg, _anneal_notes(res)))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("n", "norm_Y", "window_cov"))
        for n, y, c in res.trace.rows():
            w.writerow((n, repr(y), repr(c)))
        Path(trace_path).write_text(buf.getvalue())
    return res


def run_price(cfg, timing=False):
    """Run one pricing job and return the CSV text.

    Stream layout: the root stream (seed) splits into two children. Child 0
    feeds the estimator, or the annealer for method=anneal, whose A* estimate
    then continues on child 0 after the annealing draws. Child 1 feeds the
    heat pilot. Dynamic annealing noise comes from child 0's noise substream.
    """
    pm = cfg.build_payoff()
    main, pilot = GaussianStream(cfg.seed).split(2)
    n = cfg.n_samples or default_n(cfg)
    notes = [f"payoff={cfg.payoff} method={cfg.method} antithetic_init={cfg.antithetic_init} n={n}",
             "streams: estimator=seed/0 pilot=seed/1 anneal_noise=seed/0/noise"]
    if cfg.method == "crude":
        rep = estimate.crude_mc(pm, n, main, threads=cfg.threads)
    elif cfg.method == "static":
        A = resolve_matrix(cfg.antithetic_init, pm.dim)
        rep = estimate.static_antithetic(pm, A, n, main, threads=cfg.threads)
    elif cfg.method == "dynamic":
        A0 = resolve_matrix(cfg.antithetic_init, pm.dim)
        sched = make_schedule(cfg, pm, pilot)
        res = estimate.dynamic_antithetic(pm, sched, A0, n, main)
        rep = res.report
        st = res.anneal_state
        notes += [f"schedule: {sched.describe()}",
                  f"anneal: rejections={st.rejections} penalty_hits={st.penalty_hits}"]
    else:
        A0 = resolve_matrix(cfg.antithetic_init, pm.dim)
        sched = make_schedule(cfg, pm, pilot)
        res = anneal.run(pm, sched, A0, cfg.iters, main)
        rep = estimate.static_antithetic(pm, res.A_star, n, main, threads=cfg.threads)
        notes += _anneal_notes(res)
    return render_csv(header_lines(cfg, notes), [rep], timing)


def run_probe(cfg):
    pm = cfg.build_payoff()
    A = resolve_matrix(cfg.antithetic_init, pm.dim)
    n = cfg.n_samples or PROBE_DEFAULT_N
    return estimate.covariance_probe(pm, A, n, GaussianStream(cfg.seed))


def reproduce_table(which, seed, iters=10_000, pilot_n=20_000, timing=False, threads=1):
    """Crude, -Id and annealed-A* rows for table ``which``; returns (CSV text, details).

    Stream layout: the root stream (seed) splits into five children used for
    the crude row, the -Id row, the heat pilot, the annealing run (its noise
    substream supplies zeta) and the A* row, in that order.
    """
    if which not in TABLES:
        raise ConfigError("table must be 1 or 2", "which")
    payoff_name, rows = TABLES[which]
    cfg = RunConfig(payoff=payoff_name, seed=seed, iters=iters, pilot_n=pilot_n).validate()
    pm = cfg.build_payoff()
    s_crude, s_minus, s_pilot, s_anneal, s_star = GaussianStream(seed).split(5)
    ns = [inferred_n(var, err) for _, var, err in rows]
    minus_id = -np.eye(pm.dim)

    crude = estimate.crude_mc(pm, ns[0], s_crude, threads=threads, label=rows[0][0])
    minus = estimate.static_antithetic(pm, minus_id, ns[1], s_minus, threads=threads, label=rows[1][0])
    sched = make_schedule(cfg, pm, s_pilot)
    res = anneal.run(pm, sched, minus_id, iters, s_anneal)
    star = estimate.static_antithetic(pm, res.A_star, ns[2], s_star, threads=threads, label=rows[2][0])
    notes = [
        f"table={which} payoff={payoff_name} inferred_n={','.join(map(str, ns))} A0=-Id pilot_n={pilot_n}",
        "streams: crude=seed/0 minus_id=seed/1 pilot=seed/2 anneal=seed/3 (+noise) astar=seed/4",
        *_anneal_notes(res),
    ]
    text = render_csv(header_lines(cfg, notes), [crude, minus, star], timing)
    return text, {"crude": crude, "minus_id": minus, "astar": star, "anneal": res, "n": ns}


def _add_config_flags(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--payoff", choices=PAYOFFS)
    p.add_argument("--antithetic-init", "--antithetic", dest="antithetic_init",
                   help="minus-identity | identity | reflection | path to a matrix file")
    p.add_argument("--n-samples", "--n", dest="n_samples", type=int,
                   help="sample count (default: inferred from the reference error column)")
    for name in ("spot", "strike", "vol", "vol1", "vol2", "dividend", "scale", "rate", "gamma", "b"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--normalize", help="divide the covariance-swap sum by N (true/false)")
    p.add_argument("--times", help="comma-separated observation times in years")
    p.add_argument("--heat", help="'pilot' (4 x pilot variance) or a number")
    p.add_argument("--pilot-n", dest="pilot_n", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--variant", choices=anneal.VARIANTS)
    p.add_argument("--noise", help="add annealing noise (true/false)")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--output", "-o")


def build_parser():
    parser = argparse.ArgumentParser(prog="antimc", description="Antithetic Monte Carlo with annealed rotations.")
    parser.add_argument("--version", action="version", version=f"antimc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price with crude, static, dynamic or annealed-static Monte Carlo")
    _add_config_flags(p)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--timing", action="store_true", help="fill elapsed_s (output is then not byte-reproducible)")

    p = sub.add_parser("anneal", help="search for the optimal antithetic matrix")
    _add_config_flags(p)
    p.add_argument("--save-matrix", help="write A* to this file")
    p.add_argument("--trace", help="write the per-step trace CSV to this file")

    p = sub.add_parser("probe", help="sample Cov(f(xi), f(A xi)) for a candidate matrix")
    _add_config_flags(p)

    for which in TABLES:
        p = sub.add_parser(f"reproduce-table{which}", help=f"rerun the three rows of table {which}")
        p.add_argument("--seed", type=int)
        p.add_argument("--iters", type=int, default=10_000)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--output", "-o", default="-")
        p.add_argument("--timing", action="store_true")

    p = sub.add_parser("export-matrix", help="write a named matrix, or a validated copy of a matrix file")
    p.add_argument("--antithetic", default="minus-identity")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--output", "-o", required=True)

    p = sub.add_parser("import-matrix", help="validate a matrix file and print a summary")
    p.add_argument("path")
    return parser


def env_seed():
    env = os.environ.get("ANTIMC_SEED")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"ANTIMC_SEED must be an integer, got {env!r}", "seed") from exc


def config_from_args(args):
    file_values = read_config_file(args.config) if args.config else {}
    cfg = RunConfig().with_updates(file_values)
    flags = {f.name: getattr(args, f.name) for f in dataclasses.fields(RunConfig)
             if getattr(args, f.name, None) is not None}
    cfg = cfg.with_updates(flags)
    if "seed" not in flags and "seed" not in file_values:
        seed = env_seed()
        if seed is not None:
            cfg.seed = seed
    return cfg.validate()


def _emit(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _dispatch(args):
    cmd = args.command
    if cmd == "price":
        cfg = config_from_args(args)
        _emit(run_price(cfg, timing=args.timing), cfg.output)
    elif cmd == "anneal":
        cfg = config_from_args(args)
        res = run_anneal(cfg, args.save_matrix, args.trace)
        lines = header_lines(cfg, _anneal_notes(res))
        lines.append(f"# final_window_cov={res.trace.window_cov[-1]!r}")
        _emit("\n".join(lines) + "\n", cfg.output)
    elif cmd == "probe":
        cfg = config_from_args(args)
        p = run_probe(cfg)
        text = "\n".join(header_lines(cfg)) + "\ncov,var,corr,antithetic_variance\n"
        text += f"{p.cov!r},{p.var!r},{p.corr!r},{p.antithetic_variance!r}\n"
        _emit(text, cfg.output)
    elif cmd.startswith("reproduce-table"):
        seed = args.seed if args.seed is not None else env_seed()
        if args.threads < 1:
            raise ConfigError("threads must be >= 1", "threads")
        text, _ = reproduce_table(int(cmd[-1]), seed or 0, iters=args.iters,
                                  timing=args.timing, threads=args.threads)
        _emit(text, args.output)
    elif cmd == "export-matrix":
        if args.dim < 1:
            raise ConfigError("dim must be >= 1", "dim")
        export_matrix(resolve_matrix(args.antithetic, args.dim), args.output)
    elif cmd == "import-matrix":
        A = import_matrix(args.path)
        print(f"N={A.shape[0]} orientation={lie.orientation(A):+d} "
              f"orthogonality_error={lie.orthogonality_error(A):.3e}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except (ConfigError, DomainError, UsageError) as exc:
        name = getattr(exc, "field", None)
        print(f"antimc: config error{f' [{name}]' if name else ''}: {exc}", file=sys.stderr)
        return 2
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"antimc: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
