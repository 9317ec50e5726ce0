"""Command line: ``osplit run | sweep | gen``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key=value`` lines, then flags. ``OSPLIT_OUT_DIR`` sets the default output
root. Exit codes: 0 target reached, 1 configuration error, 2 budget
exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bench import (EXIT_BUDGET, EXIT_CONFIG, EXIT_OK, METHODS, SWEEP_AXES, BenchConfig,
                    ConfigError, _out_root, run, sweep)
from .problems import PRESETS, make_preset

_INT_KEYS = {"seed", "log_every", "max_outer_budget", "max_gmco_budget", "max_inner_budget",
             "max_h_budget"}
_FLOAT_KEYS = {"eps", "delta", "mu", "L", "weight_full_grad"}
_BOOL_KEYS = {"deterministic", "skip_header"}
_CONFIG_KEYS = {f.name for f in fields(BenchConfig)} | {"axis", "values", "param"}


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _convert(key: str, raw: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    if key in _BOOL_KEYS:
        return _parse_bool(raw)
    return raw


def _parse_param(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        k = k.strip().replace("-", "_")
        try:
            num = float(v)
            out[k] = int(num) if num.is_integer() and k in ("n", "m", "p", "n_features") else num
        except ValueError:
            out[k] = v.strip()
    return out


def read_config_file(path) -> dict:
    """``key=value`` lines; ``#`` starts a comment; dashes in keys become
    underscores. ``param`` may repeat."""
    out: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.lstrip("-").replace("-", "_")
        if k not in _CONFIG_KEYS:
            raise ConfigError(f"{path}: line {lineno}: unknown key {k!r}")
        if k == "param":
            out.setdefault("param", []).append(v)
        else:
            out[k] = _convert(k, v)
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="key=value settings file (flags override it)")
    p.add_argument("--method", choices=METHODS, default=S)
    p.add_argument("--problem", choices=sorted(PRESETS), default=S)
    p.add_argument("--csv", default=S, help="data file replacing the preset's data")
    p.add_argument("--skip-header", action="store_true", default=S)
    p.add_argument("--param", action="append", default=S, metavar="KEY=VALUE",
                   help="preset parameter override (repeatable)")
    p.add_argument("--eps", type=float, default=S)
    p.add_argument("--delta", type=float, default=S)
    p.add_argument("--mu", type=float, default=S)
    p.add_argument("--L", type=float, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--inner-stop", choices=("certified", "budgeted"), default=S)
    p.add_argument("--max-outer-budget", type=int, default=S,
                   help="outer iterations (framework) or iterations/epochs (baselines)")
    p.add_argument("--max-gmco-budget", type=int, default=S, help="middle-loop iterations per call")
    p.add_argument("--max-inner-budget", type=int, default=S, help="g units per inner solve")
    p.add_argument("--max-h-budget", type=int, default=S, help="total h-gradient calls")
    p.add_argument("--out-dir", default=S)
    p.add_argument("--log-every", type=int, default=S)
    p.add_argument("--weight-full-grad", type=float, default=S)
    p.add_argument("--deterministic", action="store_true", default=S,
                   help="write elapsed_s as 0 so traces are byte-reproducible")
    p.add_argument("--name", default=S, help="output file stem")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="osplit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="one method on one problem")
    _add_common(p_run)
    p_sw = sub.add_parser("sweep", help="repeat a run over values of one parameter")
    _add_common(p_sw)
    p_sw.add_argument("--axis", choices=SWEEP_AXES, default=argparse.SUPPRESS)
    p_sw.add_argument("--values", default=argparse.SUPPRESS, help="comma-separated values")
    p_gen = sub.add_parser("gen", help="write a preset's data to files")
    p_gen.add_argument("--problem", choices=sorted(PRESETS), required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    p_gen.add_argument("--out-dir", default=None)
    return ap


def _settings(ns: argparse.Namespace) -> dict:
    vals = {}
    if "config" in ns:
        vals.update(read_config_file(ns.config))
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    params = list(vals.pop("param", [])) + list(flags.pop("param", []))
    vals.update(flags)
    vals["problem_params"] = _parse_param(params)
    return vals


def _bench_config(vals: dict) -> BenchConfig:
    kw = {k: v for k, v in vals.items() if k not in ("axis", "values")}
    cfg = BenchConfig(**kw)
    cfg.validate()
    return cfg


def _cmd_run(vals: dict) -> int:
    cfg = _bench_config(vals)
    rep = run(cfg)
    gap = "unknown" if rep.final_gap is None else f"{rep.final_gap:.3e}"
    print(f"{rep.method} on {rep.problem}: {rep.status}, gap {gap}, "
          f"h calls {rep.tally.h_grad_calls}, g units {rep.tally.g_basic_units}, "
          f"h partials {rep.tally.h_partial_units}")
    print(f"trace {rep.csv_path}\nsummary {rep.json_path}")
    if rep.message and rep.status != "converged":
        print(rep.message, file=sys.stderr)
    return rep.exit_code


def _cmd_sweep(vals: dict) -> int:
    axis = vals.get("axis")
    raw = vals.get("values")
    if axis is None or raw is None:
        raise ConfigError("sweep needs --axis and --values")
    values = [v.strip() for v in str(raw).split(",") if v.strip()]
    try:
        [float(v) for v in values]
    except ValueError:
        raise ConfigError(f"sweep values must be numbers: {raw!r}") from None
    cfg = _bench_config(vals)
    rows = sweep(cfg, axis, values)
    for r in rows:
        print(f"{axis}={r['value']}: {r['exit_status']}, h calls {r.get('h_grad_calls')}, "
              f"g units {r.get('g_basic_units')}, gap {r.get('final_gap')}")
    statuses = [r["exit_status"] for r in rows]
    if any(s.startswith("error") for s in statuses):
        return EXIT_CONFIG
    return EXIT_OK if all(s == "converged" for s in statuses) else EXIT_BUDGET


def _cmd_gen(ns: argparse.Namespace) -> int:
    prob = make_preset(ns.problem, ns.seed, **_parse_param(ns.param))
    out = Path(ns.out_dir) if ns.out_dir else _out_root(BenchConfig()) / f"{ns.problem}_s{ns.seed}"
    out.mkdir(parents=True, exist_ok=True)
    fmt = "%.17g"
    params = prob.params
    written = []
    if "A" in params:
        params["A"].save(out / "A.csr")
        np.savetxt(out / "A.csv", params["A"].toarray(), delimiter=",", fmt=fmt)
        np.savetxt(out / "G2.csv", params["G2"], delimiter=",", fmt=fmt)
        written += ["A.csr", "A.csv", "G2.csv"]
    else:
        n = prob.n
        eye = np.eye(n)
        H_h = np.column_stack([prob.h.grad(e) - prob.h.grad(np.zeros(n)) for e in eye])
        H_g = np.column_stack([prob.g.grad(e) for e in eye])
        b = -prob.h.grad(np.zeros(n))
        np.savetxt(out / "H_h.csv", H_h, delimiter=",", fmt=fmt)
        np.savetxt(out / "H_g.csv", H_g, delimiter=",", fmt=fmt)
        np.savetxt(out / "b.csv", b[None, :], delimiter=",", fmt=fmt)
        written += ["H_h.csv", "H_g.csv", "b.csv"]
    meta = {k: v for k, v in params.items() if isinstance(v, (int, float, str, bool))}
    meta.update(n=prob.n, L_h=prob.L_h, L_f=prob.L_f, mu=prob.mu, f_star=prob.f_star,
                g_mode=prob.g.mode.value)
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {', '.join(written + ['meta.json'])} to {out}")
    return EXIT_OK


def _gen_svm(ns: argparse.Namespace) -> int:
    from .problems import gen_svm
    kw = _parse_param(ns.param)
    m = int(kw.pop("m", 4000 if ns.problem == "svm-paper" else 200))
    spec = gen_svm(m, int(kw.pop("n_features", 5)), ns.seed)
    out = Path(ns.out_dir) if ns.out_dir else _out_root(BenchConfig()) / f"{ns.problem}_s{ns.seed}"
    out.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([spec.points, spec.labels])
    np.savetxt(out / "points.csv", data, delimiter=",", fmt="%.17g")
    print(f"wrote points.csv ({m} rows, last column labels) to {out}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        if ns.command == "gen":
            if ns.problem.startswith("svm"):
                return _gen_svm(ns)
            return _cmd_gen(ns)
        vals = _settings(ns)
        if ns.command == "run":
            return _cmd_run(vals)
        return _cmd_sweep(vals)
    except ConfigError as exc:
        print(f"osplit: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, TypeError) as exc:
        print(f"osplit: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
