"""Command-line interface.

    torusgff spectrum --dim 3 --side 8
    torusgff green --kind zero-avg --dim 3 --side 8 --out g.csv
    torusgff mass --dim 3 --side 16 --beta 0.5
    torusgff sample --model spherical --dim 3 --side 8 --beta 0.5 --out runs/
    torusgff verify exp_boundary_constant
    torusgff verify all --seed 1234 --out reports/
    torusgff replay reports/manifest.json

Settings resolve as command line > ``--config`` file > ``TORUSGFF_THREADS``
(threads only) > built-in defaults. The config file is flat ``key=value``
text; unknown keys are errors. Exit status: 0 success, 1 a verification gate
failed, 2 usage or configuration error.

Normalization: ``-Δf(x) = 2d f(x) - Σ_{y~x} f(y)``, so G_{Z^3}(0,0) ≈ 0.2527.
Tables built with the random-walk normalization ``(1/2d)Σ f(y) - f(x)`` differ
by a factor 2d.
"""

import argparse
import datetime as _dt
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as ex
from . import persistence as io
from . import samplers as sm
from .errors import ConfigError, DomainError, SchemaError
from .greens import CONVENTION, dirichlet_green, massive_green, zd_green, zero_average_green
from .lattice import TorusLattice
from .mass import ModelParams, Regime, beta_c, solve_torus_mass, solve_zd_mass
from .spectral import build_spectrum

DEFAULTS = {
    "dim": 3, "side": 8, "beta": None, "mass": None, "spin_n": 64, "components": 1, "seed": 1234,
    "chains": None, "sweeps": None, "burnin": None, "out": None, "format": "text", "threads": 1,
    "kind": "zero-avg", "model": "spherical", "removed": None, "count": 1,
}
TYPES = {
    "dim": int, "side": int, "beta": float, "mass": float, "spin_n": int, "components": int, "seed": int,
    "chains": int, "sweeps": int, "burnin": int, "out": str, "format": str, "threads": int,
    "kind": str, "model": str, "removed": str, "count": int,
}
CHOICES = {"format": ("csv", "json", "text"), "kind": ("massive", "zero-avg", "dirichlet", "zd"),
           "model": ("massive-gff", "zero-avg-gff", "spherical", "spin-on")}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common():
    # SUPPRESS keeps a subcommand's parser from resetting flags given before it
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("common options")
    g.add_argument("--dim", type=int)
    g.add_argument("--side", type=int)
    g.add_argument("--beta", type=float)
    g.add_argument("--mass", type=float, help="m² (squared mass)")
    g.add_argument("--spin-n", dest="spin_n", type=int, help="number of spin components N")
    g.add_argument("--components", type=int, help="projected components M")
    g.add_argument("--seed", type=int)
    g.add_argument("--chains", type=int)
    g.add_argument("--sweeps", type=int)
    g.add_argument("--burnin", type=int)
    g.add_argument("--out", help="output directory (or a file path for single-table commands)")
    g.add_argument("--format", choices=CHOICES["format"])
    g.add_argument("--threads", type=int)
    g.add_argument("--config", help="key=value configuration file")
    return p


def build_parser():
    common = _common()
    p = _Parser(prog="torusgff", description="Gaussian free fields, spherical and O(N) models on tori.",
                parents=[common])
    p.add_argument("--version", action="version", version=f"torusgff {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("spectrum", parents=[common], help="eigenvalue table of -Lap")
    g = sub.add_parser("green", parents=[common], help="Green's function kernel as CSV")
    g.add_argument("--kind", choices=CHOICES["kind"], default=None)
    g.add_argument("--removed", help="Dirichlet sites, e.g. '0,0,0;1,0,0'")
    sub.add_parser("mass", parents=[common], help="solve the mass equation")
    s = sub.add_parser("sample", parents=[common], help="draw samples and write a dump + manifest")
    s.add_argument("--model", choices=CHOICES["model"])
    s.add_argument("--count", type=int, help="samples (exact samplers) or chains (MCMC)")
    v = sub.add_parser("verify", parents=[common], help="run verification experiments")
    v.add_argument("experiment", help="experiment id or 'all'")
    r = sub.add_parser("replay", help="re-run a manifest and compare output digests")
    r.add_argument("manifest")
    return p


# ------------------------------------------------------------------ configuration
def read_config(path):
    cfg = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror or e}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        k, v = (t.strip() for t in line.split("=", 1))
        k = k.replace("-", "_")
        if k not in TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {k!r}")
        try:
            cfg[k] = TYPES[k](v)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {k}: {v!r}") from None
        if k in CHOICES and cfg[k] not in CHOICES[k]:
            raise ConfigError(f"{path}:{lineno}: {k} must be one of {', '.join(CHOICES[k])}")
    return cfg


def resolve(ns, environ=None):
    """Merge command line, config file, environment and defaults."""
    environ = os.environ if environ is None else environ
    fromfile = read_config(ns.config) if getattr(ns, "config", None) else {}
    out = {}
    for k, default in DEFAULTS.items():
        v = getattr(ns, k, None)
        if v is None:
            v = fromfile.get(k)
        if v is None and k == "threads" and environ.get("TORUSGFF_THREADS"):
            try:
                v = int(environ["TORUSGFF_THREADS"])
            except ValueError:
                raise ConfigError("TORUSGFF_THREADS must be an integer") from None
        out[k] = default if v is None else v
    if out["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    for k in ("chains", "sweeps", "count", "side", "dim"):
        if out[k] is not None and out[k] < 1:
            raise ConfigError(f"{k} must be positive")
    return out


def _lattice(c):
    return TorusLattice(c["dim"], c["side"])


def _target(c, default_name):
    """(path or None); --out may be a directory or, for single outputs, a file."""
    out = c["out"]
    if out is None:
        return None
    p = Path(out)
    if p.suffix in (".csv", ".json", ".txt"):
        return p
    return p / default_name


def _emit(c, default_name, columns, rows, comments=(), payload_kind=None):
    fmt = c["format"]
    if fmt == "json":
        text = io.dumps({"schema": io.SCHEMA_PREFIX + (payload_kind or "table"),
                         "schema_version": io.SCHEMA_VERSION,
                         "payload": {"comments": list(comments), "columns": columns,
                                     "rows": [list(r) for r in rows]}})
    elif fmt == "csv" or _target(c, default_name) is not None:
        text = io.csv_text(columns, rows, comments)
    else:
        cells = [list(columns)] + [[io.fmt(v) for v in r] for r in rows]
        widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
        lines = [f"# {x}" for x in comments]
        lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
        text = "\n".join(lines) + "\n"
    path = _target(c, default_name)
    if path is None:
        sys.stdout.write(text)
        return []
    io._write_text(path, text)
    print(f"wrote {path}")
    return [path]


# ------------------------------------------------------------------ commands
def cmd_spectrum(c):
    L = _lattice(c)
    sp = build_spectrum(L)
    rank = np.empty(L.volume, dtype=int)
    rank[sp.sorted_view] = np.arange(1, L.volume + 1)
    coords = L.coord_array
    rows = [(int(i),) + tuple(int(v) for v in coords[i]) + (float(sp.eigenvalues[i]), int(rank[i]))
            for i in range(L.volume)]
    cols = ["mode"] + [f"w_{i + 1}" for i in range(L.dim)] + ["eta", "sorted_rank"]
    _emit(c, "spectrum.csv", cols, rows, [f"n={L.side} d={L.dim} convention={CONVENTION}"])
    return 0


def _parse_sites(text, d):
    if not text:
        return []
    out = []
    for part in text.split(";"):
        xs = tuple(int(v) for v in part.split(","))
        if len(xs) != d:
            raise ConfigError(f"site {part!r} does not have {d} coordinates")
        out.append(xs)
    return out


def cmd_green(c):
    kind = c["kind"]
    m2 = c["mass"]
    if kind == "zd":
        d = c["dim"]
        R = c["side"] // 2
        m2 = 0.0 if m2 is None else m2
        pts = np.stack(np.meshgrid(*([np.arange(-R, R + 1)] * d), indexing="ij"), -1).reshape(-1, d)
        rows = [tuple(int(v) for v in y) + (zd_green(d, m2, tuple(int(v) for v in y)),) for y in pts]
        head = f"kind=zd d={d} m2={io.fmt(m2)} box_radius={R} convention={CONVENTION}"
        cols = [f"dx_{i + 1}" for i in range(d)] + ["value"]
        _emit(c, "green.csv", cols, rows, [head])
        return 0
    L = _lattice(c)
    if kind == "massive":
        if m2 is None:
            raise ConfigError("--mass is required for --kind massive")
        G = massive_green(L, m2)
    elif kind == "zero-avg":
        G = zero_average_green(L)
    else:
        G = dirichlet_green(L, _parse_sites(c["removed"], L.dim), 0.0 if m2 is None else m2)
    text = io.kernel_csv(G)
    comments = [ln[2:] for ln in text.splitlines() if ln.startswith("# ")]
    rows = G.kernel_rows()
    cols = [f"dx_{i + 1}" for i in range(L.dim)] + ["value"]
    _emit(c, "green.csv", cols, rows, comments)
    return 0


def cmd_mass(c):
    beta = c["beta"]
    if beta is None:
        raise ConfigError("--beta is required")
    d = c["dim"]
    L = _lattice(c)
    p = ModelParams(L, beta)
    sol = solve_torus_mass(p)
    bc = beta_c(d)
    rows = [("m2", sol.m_squared), ("residual", sol.residual), ("iterations", sol.iterations),
            ("regime", p.regime.value), ("beta_c", bc), ("tol_c", p.tol_c)]
    if p.regime == Regime.LOW_T:
        rows.append(("m2*(beta-beta_c)*n^d", sol.m_squared * (beta - bc) * L.volume))
    if beta < bc:
        rows.append(("m2_Zd", solve_zd_mass(d, beta)))
    comments = [f"n={L.side} d={d} beta={io.fmt(beta)} convention={CONVENTION}"]
    _emit(c, "mass.csv", ["quantity", "value"], rows, comments)
    return 0


def cmd_sample(c, argv):
    started = _now()
    L = _lattice(c)
    model = c["model"]
    seed = c["seed"]
    out = Path(c["out"] or ".")
    count = c["count"]
    streams = []
    diags = []
    if model == "massive-gff":
        if c["mass"] is None:
            raise ConfigError("--mass is required for the massive GFF")
        vals = sm.massive_gff_batch(L, c["mass"], count, seed, c["components"])
        law = {"law": "MassiveGFF", "m2": c["mass"]}
        streams.append(sm.rngmod.stream_record(seed, "massive-gff"))
        samples = [sm.FieldSample(L, v, sm.LawTag.MASSIVE_GFF, law, {}) for v in vals]
    elif model == "zero-avg-gff":
        vals = sm.zero_avg_gff_batch(L, count, seed, c["components"])
        law = {"law": "ZeroAvgGFF"}
        streams.append(sm.rngmod.stream_record(seed, "zero-avg-gff"))
        samples = [sm.FieldSample(L, v, sm.LawTag.ZERO_AVG_GFF, law, {}) for v in vals]
    else:
        if c["beta"] is None:
            raise ConfigError("--beta is required for MCMC models")
        sweeps = c["sweeps"] or 2000
        burn = c["burnin"]
        if model == "spherical":
            res = sm.map_ordered(lambda k: sm.run_spherical_chain(L, c["beta"], sweeps, burn, seed, k),
                                 range(count), c["threads"])
            law = {"law": "Spherical", "beta": c["beta"]}
        else:
            res = sm.map_ordered(lambda k: sm.run_spin_chain(L, c["beta"], c["spin_n"], sweeps,
                                                             burn if burn is not None else sweeps // 10,
                                                             seed, k, components=c["components"]),
                                 range(count), c["threads"])
            law = {"law": "SpinON", "beta": c["beta"], "N": c["spin_n"], "M": c["components"]}
        samples = [r[0] for r in res]
        streams += [r[0].provenance for r in res]
        diags = [vars(r[1]) for r in res]
    dump = out / "samples.csv"
    io.write_sample_csv(dump, samples)
    man = io.build_manifest(__version__, argv, c, seed, streams, [dump], started, _now(),
                            {"law": law, "diagnostics": diags, "n": L.side, "d": L.dim})
    io.write_manifest(out / "manifest.json", man)
    print(f"wrote {dump} and {out / 'manifest.json'}")
    return 0


def cmd_verify(c, name, argv):
    started = _now()
    names = list(ex.EXPERIMENTS) if name == "all" else [name]
    for nm in names:
        if nm not in ex.EXPERIMENTS:
            raise ConfigError(f"unknown experiment {nm!r}; choose from: all, {', '.join(ex.EXPERIMENTS)}")
    cfg = ex.RunConfig(seed=c["seed"], threads=c["threads"], chains=c["chains"], sweeps=c["sweeps"],
                       burnin=c["burnin"])
    reports = []
    timings = {}
    for nm in names:
        rep = ex.run_experiment(nm, cfg)
        reports.append(rep)
        timings[nm] = round(rep.wall_clock, 3)
        if c["format"] == "json" and c["out"] is None:
            sys.stdout.write(io.dumps(rep.to_dict()))
        else:
            sys.stdout.write(rep.to_text())
        sys.stdout.flush()
    ok = all(r.passed for r in reports)
    summary = {"experiments": {r.experiment: r.passed for r in reports}, "passed": ok}
    if c["out"] is not None:
        out = Path(c["out"])
        files = []
        for r in reports:
            files.append(io.write_json(out / f"{r.experiment}.json", "report", r.to_dict()))
            files.append(io._write_text(out / f"{r.experiment}.txt", r.to_text()))
            files.append(io.write_csv(out / f"{r.experiment}.csv", ex.CSV_COLUMNS, r.csv_rows()))
        files.append(io.write_json(out / "summary.json", "summary", summary))
        man = io.build_manifest(__version__, argv, c, c["seed"], [], files, started, _now(),
                                {"wall_clock_seconds": timings})
        io.write_manifest(out / "manifest.json", man)
    print("verify:", "PASS" if ok else "FAIL", " ".join(f"{k}={'pass' if v else 'FAIL'}"
                                                        for k, v in summary["experiments"].items()))
    return 0 if ok else 1


def cmd_replay(path):
    man = io.read_manifest(path)
    argv = list(man["command_line"])
    with tempfile.TemporaryDirectory() as tmp:
        if "--out" in argv:
            argv[argv.index("--out") + 1] = tmp
        else:
            argv += ["--out", tmp]
        code = main(argv)
        bad = []
        for name, dig in man["outputs"].items():
            f = Path(tmp) / name
            if not f.exists() or io.digest_file(f) != dig:
                bad.append(name)
    if bad:
        print("replay: digest mismatch for " + ", ".join(bad))
        return 1
    print(f"replay: {len(man['outputs'])} outputs reproduced byte-identically")
    return code


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 2
    if ns.command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        if ns.command == "replay":
            return cmd_replay(ns.manifest)
        c = resolve(ns)
        if ns.command == "spectrum":
            return cmd_spectrum(c)
        if ns.command == "green":
            return cmd_green(c)
        if ns.command == "mass":
            return cmd_mass(c)
        if ns.command == "sample":
            return cmd_sample(c, argv)
        return cmd_verify(c, ns.experiment, argv)
    except (ConfigError, DomainError, SchemaError) as e:
        print(f"torusgff: error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"torusgff: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
