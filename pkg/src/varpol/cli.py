"""Command-line front end: ``varpol fit|gof|policy|backtest|compare``.

Every subcommand loads prices, carves the windows, fits the requested
families on the fit window and then produces its own artifacts. All
results are computed before anything is written, and every file is
written to a temporary name and renamed into place.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

from . import backtest as bt
from .errors import InvalidValue, UnknownFlag, VarpolError
from .fit import POSITIVE_FAMILIES, TRANSFORMS, fit_family, prepare_sample
from .gof import KS_CONSTANTS, compare_models, ks_statistic
from .marketdata import WindowSpec, compute_returns, load_prices, split_windows
from .policy import CONVENTIONS, RATES, backward_path, default_config

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib

SUBCOMMANDS = ("fit", "gof", "policy", "backtest", "compare")
ALL_FAMILIES = ("pareto", "weibull", "invgauss", "mixnorm", "vargamma", "kde")
DEFAULT_FAMILIES = {
    "fit": ALL_FAMILIES,
    "gof": ("pareto", "weibull", "invgauss", "mixnorm", "vargamma"),
    "compare": ("pareto", "weibull", "invgauss", "mixnorm", "vargamma"),
    "policy": ("pareto", "weibull", "invgauss", "kde"),
    "backtest": ("pareto", "weibull", "invgauss", "kde"),
}
POLICY_FAMILIES = ("pareto", "weibull", "invgauss", "kde")


def bundled_sample() -> Path:
    return Path(str(resources.files("varpol") / "data" / "sample_prices.csv"))


@dataclass(frozen=True)
class RunConfig:
    input: str
    families: tuple
    rates: tuple = RATES
    quantile: float = 0.05
    confidence: float = 0.95
    txn_rate: float = 0.10
    terminal_pi: float | None = None
    horizon: int = 26
    wealth_scale: float | None = None
    bandwidth: float | None = None
    denominator_convention: str | None = None
    fit_len: int = 700
    holdout_len: int = 50
    terminal_len: int = 26
    offset: int = 0
    transform: str = "positive"
    pareto_form: str = "lomax"
    level: float = 0.05
    out_dir: str = "."

    def window_spec(self) -> WindowSpec:
        return WindowSpec(self.fit_len, self.holdout_len, self.terminal_len)

    def policy_config(self, family: str, rate: float):
        return default_config(
            family,
            rate,
            quantile_level=self.quantile,
            confidence=self.confidence,
            txn_rate=self.txn_rate,
            terminal_pi=self.terminal_pi,
            horizon=self.horizon,
            wealth_scale=self.wealth_scale,
            denominator_convention=self.denominator_convention,
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidValue("arguments", message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="varpol", description="VaR-constrained allocation policies under fitted return models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", help="CSV with header date,close (default: bundled sample)")
        p.add_argument("--config", help="TOML or JSON file with run settings")
        p.add_argument("--family", action="append", choices=ALL_FAMILIES, help="family to process (repeatable)")
        p.add_argument("--rate", action="append", type=float, help="per-period riskfree rate (repeatable)")
        p.add_argument("--quantile", type=float, help="VaR quantile level")
        p.add_argument("--confidence", type=float, help="coverage confidence level")
        p.add_argument("--txn-rate", type=float, help="proportional transaction cost rate")
        p.add_argument("--terminal-pi", type=float, help="terminal allocation (default per family)")
        p.add_argument("--horizon", type=int, help="number of decision epochs")
        p.add_argument("--wealth-scale", type=float, help="investible wealth M (default 1, 1000 for kde)")
        p.add_argument("--bandwidth", type=float, help="KDE bandwidth (default Silverman's rule)")
        p.add_argument("--denominator-convention", choices=CONVENTIONS)
        p.add_argument("--fit-len", type=int)
        p.add_argument("--holdout-len", type=int)
        p.add_argument("--terminal-len", type=int)
        p.add_argument("--offset", type=int, help="index of the first fit-window return")
        p.add_argument("--transform", choices=TRANSFORMS, help="support mapping for positive-support families")
        p.add_argument("--pareto-form", choices=("type1", "lomax"))
        p.add_argument("--level", type=float, choices=sorted(KS_CONSTANTS), help="KS significance level")
        p.add_argument("--out-dir", help="output directory (fallback: $VARPOL_OUT_DIR, then .)")
    return parser


_FLAG_FIELDS = {
    "input": "input",
    "family": "families",
    "rate": "rates",
    "quantile": "quantile",
    "confidence": "confidence",
    "txn_rate": "txn_rate",
    "terminal_pi": "terminal_pi",
    "horizon": "horizon",
    "wealth_scale": "wealth_scale",
    "bandwidth": "bandwidth",
    "denominator_convention": "denominator_convention",
    "fit_len": "fit_len",
    "holdout_len": "holdout_len",
    "terminal_len": "terminal_len",
    "offset": "offset",
    "transform": "transform",
    "pareto_form": "pareto_form",
    "level": "level",
    "out_dir": "out_dir",
}


def _read_config_file(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise InvalidValue("config", f"no such file: {p}")
    text = p.read_text()
    try:
        doc = json.loads(text) if p.suffix.lower() == ".json" else tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise InvalidValue("config", str(exc)) from None
    out = {}
    for key, value in doc.items():
        norm = key.replace("-", "_")
        field = _FLAG_FIELDS.get(norm, norm if norm in RunConfig.__dataclass_fields__ else None)
        if field is None:
            raise UnknownFlag(f"unknown config key {key!r}")
        if field in ("families", "rates") and not isinstance(value, list):
            value = [value]
        out[field] = value
    return out


def _validate(cfg: RunConfig, command: str) -> RunConfig:
    for fam in cfg.families:
        if fam not in ALL_FAMILIES:
            raise InvalidValue("family", f"unknown family {fam!r}")
        if command in ("policy", "backtest") and fam not in POLICY_FAMILIES:
            raise InvalidValue("family", f"{fam} has no policy solver; use one of {POLICY_FAMILIES}")
    if not cfg.rates:
        raise InvalidValue("rate", "at least one rate is required")
    if not 0 < cfg.quantile < 1:
        raise InvalidValue("quantile", f"must lie in (0, 1), got {cfg.quantile!r}")
    if not 0 < cfg.confidence < 1:
        raise InvalidValue("confidence", f"must lie in (0, 1), got {cfg.confidence!r}")
    if cfg.bandwidth is not None and not cfg.bandwidth > 0:
        raise InvalidValue("bandwidth", "must be positive")
    if cfg.offset < 0:
        raise InvalidValue("offset", "must be non-negative")
    if cfg.transform not in TRANSFORMS:
        raise InvalidValue("transform", f"must be one of {TRANSFORMS}")
    if cfg.pareto_form not in ("type1", "lomax"):
        raise InvalidValue("pareto_form", "must be type1 or lomax")
    if not any(math.isclose(cfg.level, k) for k in KS_CONSTANTS):
        raise InvalidValue("level", f"must be one of {sorted(KS_CONSTANTS)}")
    try:
        cfg.window_spec()
    except ValueError as exc:
        raise InvalidValue("window", str(exc)) from None
    for fam in cfg.families:
        if fam in POLICY_FAMILIES:
            for r in cfg.rates:
                cfg.policy_config(fam, r)
    return cfg


def parse_config(argv=None, env=None) -> tuple[str, RunConfig]:
    """Parse flags, merge an optional config file and validate.

    Explicit flags override the file, which overrides the defaults.
    """
    env = os.environ if env is None else env
    parser = build_parser()
    ns, extra = parser.parse_known_args(argv)
    if extra:
        raise UnknownFlag(f"unrecognised arguments: {' '.join(extra)}")
    merged: dict = {}
    if ns.config:
        merged.update(_read_config_file(ns.config))
    for dest, field in _FLAG_FIELDS.items():
        value = getattr(ns, dest, None)
        if value is not None:
            merged[field] = value
    merged.setdefault("input", str(bundled_sample()))
    merged.setdefault("out_dir", env.get("VARPOL_OUT_DIR") or ".")
    merged["families"] = tuple(merged.get("families") or DEFAULT_FAMILIES[ns.command])
    merged["rates"] = tuple(float(r) for r in merged.get("rates") or RATES)
    try:
        cfg = RunConfig(**merged)
    except TypeError as exc:
        raise InvalidValue("config", str(exc)) from None
    return ns.command, _validate(cfg, ns.command)


# ---------------------------------------------------------------- rendering


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_csv(columns, rows) -> str:
    lines = [",".join(columns)]
    lines += [",".join(_fmt(r[c]) for c in columns) for r in rows]
    return "\n".join(lines) + "\n"


def render_json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- execution


def _fit_all(cfg: RunConfig, windows):
    reports = {}
    for fam in cfg.families:
        sample = prepare_sample(windows.fit.values, fam, cfg.transform)
        reports[fam] = fit_family(fam, sample, pareto_form=cfg.pareto_form, bandwidth=cfg.bandwidth)
    return reports


def _holdout_for(cfg: RunConfig):
    return lambda values, family: prepare_sample(values, family, cfg.transform)


def _rate_tag(rate: float) -> str:
    return repr(float(rate))


def execute(command: str, cfg: RunConfig) -> dict[Path, str]:
    """Compute every artifact of ``command`` and return them keyed by path."""
    prices = load_prices(cfg.input)
    windows = split_windows(compute_returns(prices), cfg.window_spec(), cfg.offset)
    reports = _fit_all(cfg, windows)
    out = Path(cfg.out_dir)
    files: dict[Path, str] = {}
    meta = {
        "input": str(cfg.input),
        "offset": cfg.offset,
        "window": asdict(cfg.window_spec()),
        "terminal_overlaps_holdout": windows.terminal_overlaps_holdout,
        "transform": cfg.transform,
    }

    if command == "fit":
        for fam, rep in reports.items():
            doc = rep.to_dict()
            doc["sample"] = {**meta, "positive_support": fam in POSITIVE_FAMILIES}
            files[out / f"fit_{fam}.json"] = render_json(doc)

    elif command in ("gof", "compare"):
        transform = _holdout_for(cfg)
        models = [reports[f].model for f in cfg.families]
        table = compare_models(windows.holdout.values, models, cfg.level, transform)
        csv_text = render_csv(("family", "n_params", "D", "critical", "reject"), [r.row() for r in table])
        if command == "compare":
            files[out / "comparison.csv"] = csv_text
        else:
            for fam in cfg.families:
                res = ks_statistic(transform(windows.holdout.values, fam), reports[fam].model, cfg.level)
                doc = {**res.row(), "n": res.n, "level": res.level}
                files[out / f"ks_{fam}.json"] = render_json(doc)
            files[out / "gof_comparison.csv"] = csv_text

    elif command == "policy":
        cols = ("t", "pi", "feasible_flag", "status", "side")
        for fam in cfg.families:
            for rate in cfg.rates:
                pc = cfg.policy_config(fam, rate)
                for mode in ("none", "with"):
                    path = backward_path(reports[fam].model, pc, mode)
                    tag = "cost" if mode == "with" else "nocost"
                    files[out / f"policy_{fam}_r{_rate_tag(rate)}_{tag}.csv"] = render_csv(cols, path.rows())

    elif command == "backtest":
        cols = ("t", "pi", "wealth", "reward", "value", "scenario_label")
        for fam in cfg.families:
            configs = [cfg.policy_config(fam, r) for r in cfg.rates]
            for res in bt.run_scenarios(reports[fam].model, windows.terminal, configs):
                files[out / f"backtest_{res.label}.csv"] = render_csv(cols, res.rows())

    else:  # pragma: no cover - argparse restricts the choices
        raise InvalidValue("command", command)
    return files


def _error_doc(exc: VarpolError) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code})


def main(argv=None) -> int:
    try:
        command, cfg = parse_config(argv)
        files = execute(command, cfg)
        for path, text in files.items():
            write_atomic(path, text)
    except VarpolError as exc:
        print(_error_doc(exc), file=sys.stderr)
        return exc.exit_code
    print(json.dumps({"command": command, "written": sorted(str(p) for p in files)}))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
