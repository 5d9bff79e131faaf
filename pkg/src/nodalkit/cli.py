"""Command-line front end.

    nodalkit density  --ell 100 --psi-min 0.01 --psi-max 314
    nodalkit length   --ells 50,100,200,400,800
    nodalkit simulate --ell 20 --mode dirichlet --replicates 500 --n-theta 400 --n-phi 800
    nodalkit verify

Settings may also come from a file of ``key = value`` lines (``--config``);
flags override the file.  Every output starts with a ``schema=1`` header that
records the full configuration; the wall-clock timestamp sits on a line of its
own so two runs with the same configuration differ only there.
"""
from __future__ import annotations

import argparse
import contextlib
import dataclasses
import datetime as _dt
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import density, kac_rice, oracles
from .errors import NodalkitError, NumericalFailure
from .nodal_geometry import extract_nodal_length, monte_carlo_nodal_length
from .sampler import MODES, Grid, resolve_threads, sample_coefficients, synthesize_field

SCHEMA = 1
COMMANDS = ("density", "length", "simulate", "verify")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    ell: int = 100
    ells: list = field(default_factory=lambda: [50, 100, 200, 400, 800])
    mode: str = "dirichlet"
    n_theta: int | None = None
    n_phi: int | None = None
    replicates: int = 100
    seed: int = 0
    psi_min: float = 0.01
    psi_max: float | None = None
    n_psi: int = 200
    regimes: list = field(default_factory=lambda: list(density.ALL_REGIMES))
    eps0: float = kac_rice.BOUNDARY_LAYER
    far_c: float = kac_rice.FAR_CONSTANT
    psi_switch: float = density.PSI_SWITCH
    nodes: int = kac_rice.NODES_PER_PANEL
    equator_exclusion: float = 0.0
    output: str = "-"
    format: str | None = None
    threads: int | None = None
    plot: str | None = None
    dump_segments: str | None = None
    dump_field: str | None = None

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.command in COMMANDS, f"unknown command {self.command!r}")
        need(self.ell >= 1, "ell must be >= 1")
        need(len(self.ells) >= 1 and min(self.ells) >= 1, "ells must be positive")
        if self.command == "length":
            need(len(self.ells) >= 5 and max(self.ells) >= 10 * min(self.ells),
                 "the deficiency fit needs at least five degrees spanning a decade")
        need(self.mode in MODES, f"mode must be one of {MODES}")
        need(self.replicates >= 30, "replicates must be >= 30")
        need(0.0 < self.psi_min, "psi_min must be positive")
        if self.psi_max is not None:
            need(self.psi_min < self.psi_max <= math.pi * self.ell, "need psi_min < psi_max <= pi * ell")
        need(self.n_psi >= 2, "n_psi must be >= 2")
        need(all(r in density.ALL_REGIMES for r in self.regimes),
             f"regimes must be drawn from {density.ALL_REGIMES}")
        need(0.0 < self.eps0 < self.far_c, "need 0 < eps0 < far_c")
        need(self.psi_switch > 0.0, "psi_switch must be positive")
        need(self.nodes >= 4, "nodes must be >= 4")
        need(self.equator_exclusion >= 0.0, "equator_exclusion must be >= 0")
        need(self.format in (None, "csv", "json"), "format must be csv or json")
        need(self.threads is None or self.threads >= 1, "threads must be >= 1")
        if self.command == "simulate":
            grid = self.grid()
            try:
                grid.check_resolution(self.ell)
            except NodalkitError as exc:
                raise ConfigError(str(exc)) from exc
        return self

    def grid(self) -> Grid:
        n_theta = self.n_theta or 20 * self.ell + 1
        n_phi = self.n_phi or 40 * self.ell
        if self.mode == "full" and self.n_theta is None:
            n_theta = 40 * self.ell + 1
        return Grid.for_mode(self.mode, n_theta, n_phi)

    def output_format(self) -> str:
        if self.format:
            return self.format
        return "json" if self.command == "length" else "csv"

    def header_items(self) -> list[tuple[str, str]]:
        items = []
        for f in dataclasses.fields(self):
            if f.name in ("output", "plot", "dump_segments", "dump_field", "threads"):
                continue    # where results go and how fast they come must not change them
            value = getattr(self, f.name)
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            items.append((f.name, "" if value is None else str(value)))
        return items


_INT_KEYS = {"ell", "n_theta", "n_phi", "replicates", "seed", "n_psi", "nodes", "threads"}
_FLOAT_KEYS = {"psi_min", "psi_max", "eps0", "far_c", "psi_switch", "equator_exclusion"}
_LIST_KEYS = {"ells": int, "regimes": str}
_STR_KEYS = {"mode", "output", "format", "plot", "dump_segments", "dump_field"}


def _coerce(key: str, raw):
    if raw is None or isinstance(raw, (int, float, list)) and not isinstance(raw, bool):
        return raw
    text = str(raw).strip()
    try:
        if key in _INT_KEYS:
            return int(text)
        if key in _FLOAT_KEYS:
            return float(text)
        if key in _LIST_KEYS:
            return [_LIST_KEYS[key](p.strip()) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc
    if key in _STR_KEYS:
        return text
    raise ConfigError(f"unknown setting {key!r}")


def read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            out[key] = _coerce(key, value)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="file of key = value lines; flags override it")
    common.add_argument("--output", "-o", help="output path, '-' for stdout")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--threads", type=int, help="worker cap (also NODALKIT_THREADS)")
    common.add_argument("--plot", help="also render a matplotlib figure to this path")
    common.add_argument("--seed", type=int)

    quad = argparse.ArgumentParser(add_help=False)
    quad.add_argument("--eps0", type=float, help="end of the near-boundary region")
    quad.add_argument("--far-c", type=float, help="start of the far region")
    quad.add_argument("--psi-switch", type=float, help="series/direct crossover")

    parser = argparse.ArgumentParser(prog="nodalkit", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", parents=[common, quad], help="zero-density profile")
    p.add_argument("--ell", type=int)
    p.add_argument("--psi-min", type=float)
    p.add_argument("--psi-max", type=float)
    p.add_argument("--n-psi", type=int)
    p.add_argument("--regimes", help="comma list from " + ",".join(density.ALL_REGIMES))

    p = sub.add_parser("length", parents=[common, quad], help="Kac-Rice table and deficiency fit")
    p.add_argument("--ells", help="comma-separated degrees")
    p.add_argument("--nodes", type=int, help="Gauss nodes per panel before doubling")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo nodal length campaign")
    p.add_argument("--ell", type=int)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--replicates", type=int)
    p.add_argument("--n-theta", type=int)
    p.add_argument("--n-phi", type=int)
    p.add_argument("--equator-exclusion", type=float)
    p.add_argument("--dump-segments", help="CSV of the first replicate's nodal segments")
    p.add_argument("--dump-field", help="binary dump of the first replicate's grid values")

    sub.add_parser("verify", parents=[common], help="oracle and invariant suite")
    return parser


def config_from_args(argv=None) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    settings = {}
    if args.config:
        try:
            settings.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        settings[key] = _coerce(key, value)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(settings) - known
    if unknown:
        raise ConfigError(f"unknown settings: {', '.join(sorted(unknown))}")
    return ExperimentConfig(command=args.command, **settings).validate()


# --- output helpers -----------------------------------------------------------

def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _csv_header(cfg: ExperimentConfig) -> list[str]:
    lines = [f"schema={SCHEMA}", f"command={cfg.command}"]
    lines += [f"config.{k}={v}" for k, v in cfg.header_items()]
    lines.append(f"seed={cfg.seed}")
    lines.append(f"timestamp={_timestamp()}")
    return lines


def _json_document(cfg: ExperimentConfig, payload: dict) -> str:
    doc = {
        "schema": SCHEMA,
        "command": cfg.command,
        "config": dict(cfg.header_items()),
        "seed": cfg.seed,
        "timestamp": _timestamp(),
        **payload,
    }
    return json.dumps(doc, indent=2, sort_keys=False, default=float) + "\n"


def _write_comments(handle, lines):
    for line in lines:
        handle.write(f"# {line}\n")


@contextlib.contextmanager
def _open_output(path: str):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


# --- commands -------------------------------------------------------------------

def _density(cfg: ExperimentConfig, out):
    psi_max = cfg.psi_max or math.pi * cfg.ell
    psis = np.geomspace(cfg.psi_min, psi_max, cfg.n_psi)
    profile = density.density_profile(cfg.ell, psis, cfg.regimes, cfg.far_c, cfg.psi_switch)
    if cfg.output_format() == "csv":
        profile.write_csv(out, _csv_header(cfg) + [
            f"plateau={density.plateau(cfg.ell)!r}",
            f"near_limit={density.k1_near_asymptotic(cfg.ell)!r}",
        ])
    else:
        rows = [{"psi": p, "value": v, "regime": r} for p, v, r in profile.samples]
        out.write(_json_document(cfg, {"plateau": density.plateau(cfg.ell), "rows": rows}))
    return profile


def _length(cfg: ExperimentConfig, out):
    quad = dict(nodes=cfg.nodes, eps0=cfg.eps0, far_c=cfg.far_c, psi_switch=cfg.psi_switch)
    preds = [kac_rice.expected_nodal_length(d, **quad) for d in cfg.ells]
    fit = kac_rice.fit_log_slope(cfg.ells, [p.deficiency for p in preds])
    table = [{
        "ell": p.degree, "total": p.total, "leading": p.leading, "deficiency": p.deficiency,
        "interior_deficiency": p.interior_deficiency, "hc": p.region_contributions["hc"],
        "hi": p.region_contributions["hi"], "hf": p.region_contributions["hf"],
        "full_sphere_baseline": kac_rice.berard_baseline(p.degree),
    } for p in preds]
    fit_doc = {"slope": fit.slope, "intercept": fit.intercept,
               "reference_slope": kac_rice.REFERENCE_SLOPE, "residuals": fit.residuals}
    if cfg.output_format() == "json":
        out.write(_json_document(cfg, {"fit": fit_doc, "table": table}))
    else:
        _write_comments(out, _csv_header(cfg) + [
            f"fit.slope={fit.slope!r}", f"fit.intercept={fit.intercept!r}",
            f"fit.reference_slope={kac_rice.REFERENCE_SLOPE!r}"])
        keys = list(table[0])
        out.write(",".join(keys) + "\n")
        for row in table:
            out.write(",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k])
                               for k in keys) + "\n")
    return table, fit


def _simulate(cfg: ExperimentConfig, out):
    grid = cfg.grid()
    res = monte_carlo_nodal_length(cfg.ell, cfg.mode, cfg.replicates, grid, cfg.seed,
                                   cfg.equator_exclusion, cfg.threads)
    if cfg.mode == "dirichlet":
        reference = kac_rice.expected_nodal_length(cfg.ell).total
        ref_name = "kac_rice"
    else:
        reference = kac_rice.berard_baseline(cfg.ell)
        ref_name = "full_sphere_baseline"
    summary = {"mean": res.mean, "stderr": res.stderr, "reference": reference,
               "reference_kind": ref_name, "z": (res.mean - reference) / res.stderr
               if res.stderr > 0 else 0.0}
    if cfg.output_format() == "csv":
        _write_comments(out, _csv_header(cfg) + [f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}"
                                                 for k, v in summary.items()])
        out.write("replicate,length\n")
        for i, v in enumerate(res.values):
            out.write(f"{i},{v!r}\n")
    else:
        out.write(_json_document(cfg, {"summary": summary,
                                       "lengths": [float(v) for v in res.values]}))

    if cfg.dump_segments or cfg.dump_field:
        sample = synthesize_field(sample_coefficients(cfg.ell, cfg.mode, cfg.seed, 0), grid)
        if cfg.dump_segments:
            segs = extract_nodal_length(sample, cfg.equator_exclusion)
            with open(cfg.dump_segments, "w", encoding="utf-8", newline="") as fh:
                segs.write_csv(fh)
        if cfg.dump_field:
            with open(cfg.dump_field, "wb") as fh:
                sample.write_binary(fh)
    return res, summary


def _verify(cfg: ExperimentConfig, out):
    reports = oracles.run_verification(cfg.seed) + invariant_reports(cfg.seed)
    if cfg.output_format() == "csv":
        _write_comments(out, _csv_header(cfg))
        oracles.write_reports_csv(reports, out)
    else:
        out.write(_json_document(cfg, {"reports": [dataclasses.asdict(r) for r in reports]}))
    return reports


def invariant_reports(seed: int = 0) -> list:
    """Cheap structural checks on sampled fields."""
    reports = []
    grid = Grid(41, 80)
    sample = synthesize_field(sample_coefficients(4, "dirichlet", seed), grid)
    reports.append(oracles.OracleReport.compare(
        "sampled field on equator", 0.0, float(np.abs(sample.values[-1]).max()), 1e-10, "abs"))
    th, ph = np.meshgrid(grid.theta[::8], grid.phi[::16], indexing="ij")
    direct = sample.evaluate(th, ph)
    reports.append(oracles.OracleReport.compare(
        "FFT synthesis vs direct sum", 0.0,
        float(np.abs(direct - sample.values[::8, ::16]).max()), 1e-9, "abs"))
    length = extract_nodal_length(sample).total_length
    neg = dataclasses.replace(sample, values=-sample.values,
                              evaluator=lambda t, p: -sample.evaluate(t, p),
                              row_evaluator=lambda t: -sample.rows(t))
    reports.append(oracles.OracleReport.compare(
        "nodal length under T -> -T", length, extract_nodal_length(neg).total_length, 0.0, "abs"))
    one = synthesize_field(sample_coefficients(1, "dirichlet", seed), Grid(21, 40))
    reports.append(oracles.OracleReport.compare(
        "sampled l=1 nodal length", 2 * math.pi, extract_nodal_length(one).total_length, 0.0, "abs"))
    return reports


def _failed(result, command) -> bool:
    if command == "verify":
        return not all(r.passed for r in result)
    return False


# --- plotting ----------------------------------------------------------------------

def render_plot(cfg: ExperimentConfig, result, path: str):
    """Write a figure for the command's main result (matplotlib, Agg backend)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if cfg.command == "density":
        for regime in cfg.regimes:
            ax.plot(result.psis(regime), result.values(regime), label=regime, lw=1.0)
        ax.axhline(density.plateau(cfg.ell), color="0.5", ls=":", lw=0.8)
        ax.set_xscale("log")
        ax.set_xlabel(r"$\psi$")
        ax.set_ylabel(r"$K_1$")
        ax.legend(frameon=False)
    elif cfg.command == "length":
        table, fit = result
        x = np.log([r["ell"] for r in table])
        ax.plot(x, [r["deficiency"] for r in table], "o", label="Kac-Rice")
        ax.plot(x, fit.slope * x + fit.intercept, "-", lw=0.8, label=f"slope {fit.slope:.4f}")
        ax.set_xlabel(r"$\log \ell$")
        ax.set_ylabel("deficiency")
        ax.legend(frameon=False)
    elif cfg.command == "simulate":
        res, summary = result
        ax.hist(res.values, bins=30, color="0.7")
        ax.axvline(summary["reference"], color="k", lw=1.0, label=summary["reference_kind"])
        ax.axvline(res.mean, color="C3", ls="--", lw=1.0, label="sample mean")
        ax.set_xlabel("nodal length")
        ax.legend(frameon=False)
    else:
        devs = [max(r.rel_dev, 1e-18) for r in result]
        ax.semilogy(devs, ".", ms=3)
        ax.set_xlabel("check")
        ax.set_ylabel("relative deviation")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


_HANDLERS = {"density": _density, "length": _length, "simulate": _simulate, "verify": _verify}


def run(cfg: ExperimentConfig) -> int:
    """Dispatch a validated configuration; returns the exit status."""
    cfg.threads = resolve_threads(cfg.threads)
    buf = io.StringIO()
    result = _HANDLERS[cfg.command](cfg, buf)
    with _open_output(cfg.output) as out:
        out.write(buf.getvalue())
    if cfg.plot:
        render_plot(cfg, result, cfg.plot)
    return EXIT_FAILURE if _failed(result, cfg.command) else EXIT_OK


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except ConfigError as exc:
        print(f"nodalkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:          # argparse usage errors
        return int(exc.code or 0)
    try:
        return run(cfg)
    except NumericalFailure as exc:
        print(json.dumps({"error": str(exc), "diagnostics": exc.diagnostics},
                         indent=2, default=str), file=sys.stderr)
        return EXIT_FAILURE
    except NodalkitError as exc:
        print(f"nodalkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
