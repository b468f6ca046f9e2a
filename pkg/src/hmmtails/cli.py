"""Command line entry point: ``hmmtails <command> ...``.

Exit codes: 0 ok, 1 validation failure, 2 regime failure (no Kesten exponent,
non-contracting operator, ...), 3 simulation failure.  Settings resolve as
defaults < ``--config`` file < ``HMMTAILS_*`` environment < flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, estimate, simulate, spectral
from .errors import EstimateError, ModelError, ModelFileError, SimError, SpectralError
from .model import check_assumptions
from .modelfile import load_model, model_to_dict
from .serialize import dumps, read_samples_csv, write_blocks_csv, write_json, write_samples_csv

log = logging.getLogger("hmmtails")

COMMANDS = ("check", "solve-alpha", "tail-constants", "simulate", "blocks", "estimate", "report")
ENV_PREFIX = "HMMTAILS_"


@dataclass
class RunConfig:
    command: str = "check"
    model_path: str | None = None
    seed: int = 0
    shards: int = 1
    threads: int = 1
    tol_spectral: float = spectral.SPECTRAL_TOL
    tol_root: float = spectral.ROOT_TOL
    beta_max: float = 16.0
    alpha: str | None = None
    samples: int = 100_000
    method: str = "backward"
    burn_in: int = 1000
    depth: int | None = None
    thin: int = simulate.DEFAULT_THIN
    blocks: int = 10_000
    y_star: str | None = None
    r: float = 0.5
    input_path: str | None = None
    window: str = "q:0.99,0.9999"
    per_state: bool = False
    out: str | None = None
    json_out: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ModelFileError("$.command", f"expected one of {list(COMMANDS)}")
        if not 0 <= int(self.seed) < 2**64:
            raise ModelFileError("$.seed", "expected an unsigned 64-bit integer")
        if self.shards < 1 or self.threads < 1:
            raise ModelFileError("$.shards", "shards and threads must be >= 1")


CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw, where: str):
    kind = CONFIG_FIELDS[name].type
    try:
        if raw is None:
            return None
        if "bool" in kind:
            if isinstance(raw, str):
                return raw.lower() in ("1", "true", "yes")
            return bool(raw)
        if kind.startswith("int"):
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ModelFileError(where, f"cannot interpret {raw!r} as {kind}") from None


def load_config_file(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError("$", f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFileError("$", "config must be a JSON object")
    out = {}
    for key, value in doc.items():
        if key not in CONFIG_FIELDS:
            raise ModelFileError(f"$.{key}", "unknown config key")
        out[key] = _coerce(key, value, f"$.{key}")
    return out


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for name in CONFIG_FIELDS:
        key = ENV_PREFIX + name.upper()
        if key in environ:
            out[name] = _coerce(name, environ[key], key)
    return out


def resolve_config(args: argparse.Namespace, environ=None) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    values.update(env_overrides(environ))
    for name in CONFIG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    values["command"] = args.command
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--config", help="JSON file with RunConfig keys (unknown keys are rejected)")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("--tol-spectral", dest="tol_spectral", type=float)
    g.add_argument("--tol-root", dest="tol_root", type=float)
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hmmtails", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hmmtails {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_model(p):
        p.add_argument("--model", dest="model_path", required=True)
        return p

    p = with_model(sub.add_parser("check", parents=[common], help="evaluate assumptions (A1)-(A4) and Kesten conditions"))
    p.add_argument("--alpha")
    p.add_argument("--beta-max", dest="beta_max", type=float)
    p.add_argument("--out")

    p = with_model(sub.add_parser("solve-alpha", parents=[common], help="root of Lambda and the Lambda curve"))
    p.add_argument("--beta-max", dest="beta_max", type=float)
    p.add_argument("--out")

    p = with_model(sub.add_parser("tail-constants", parents=[common], help="K, K_plus, K_minus vectors"))
    p.add_argument("--alpha")
    p.add_argument("--out")

    p = with_model(sub.add_parser("simulate", parents=[common], help="stationary samples as CSV"))
    p.add_argument("--samples", type=int)
    p.add_argument("--method", choices=["backward", "burnin"])
    p.add_argument("--burnin", dest="burn_in", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--shards", type=int)
    p.add_argument("--out")

    p = with_model(sub.add_parser("blocks", parents=[common], help="regeneration blocks as CSV"))
    p.add_argument("--blocks", type=int)
    p.add_argument("--y-star", dest="y_star")
    p.add_argument("--r", type=float)
    p.add_argument("--out")

    p = sub.add_parser("estimate", parents=[common], help="tail index and constants from a sample CSV")
    p.add_argument("--in", dest="input_path", required=True)
    p.add_argument("--alpha", help="a number or 'auto' (Hill estimate)")
    p.add_argument("--window", help="q:LO,HI (quantiles of |R|) or t:LO,HI (absolute)")
    p.add_argument("--per-state", dest="per_state", action="store_const", const=True)
    p.add_argument("--json", dest="json_out")

    p = with_model(sub.add_parser("report", parents=[common], help="theory vs simulation with pass/fail flags"))
    p.add_argument("--samples", type=int)
    p.add_argument("--method", choices=["backward", "burnin"])
    p.add_argument("--depth", type=int)
    p.add_argument("--shards", type=int)
    p.add_argument("--y-star", dest="y_star")
    p.add_argument("--r", type=float)
    p.add_argument("--json", dest="json_out")
    return parser


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _emit(doc: dict, path: str | None) -> None:
    if path:
        write_json(doc, path)
    else:
        sys.stdout.write(dumps(doc) + "\n")


def _header(cfg: RunConfig) -> dict:
    return {"tool": "hmmtails", "version": __version__, "config": dataclasses.asdict(cfg)}


def _alpha_arg(cfg: RunConfig, model) -> float:
    if cfg.alpha not in (None, "auto"):
        try:
            value = float(cfg.alpha)
        except ValueError:
            raise ModelFileError("--alpha", f"expected a number, got {cfg.alpha!r}") from None
        return value
    alpha = simulate.working_exponent(model)
    if alpha is None:
        raise spectral.NoKestenExponent("no exponent: give --alpha or an alpha_hint")
    return alpha


def _window(spec: str):
    try:
        kind, rest = spec.split(":", 1)
        lo, hi = (float(v) for v in rest.split(","))
    except ValueError:
        raise ModelFileError("--window", f"expected q:LO,HI or t:LO,HI, got {spec!r}") from None
    if kind not in ("q", "t"):
        raise ModelFileError("--window", "kind must be q or t")
    return kind, (lo, hi)


def _vec(x):
    return None if x is None else [float(v) for v in x]


def cmd_check(cfg: RunConfig, model) -> dict:
    alpha = _alpha_arg(cfg, model)
    rep = check_assumptions(model, alpha, beta_max=cfg.beta_max)
    return {**_header(cfg), "assumptions": rep, "grey_regime": rep.grey_regime}


def cmd_solve_alpha(cfg: RunConfig, model) -> dict:
    alpha = spectral.solve_alpha(model, cfg.beta_max, cfg.tol_root, cfg.tol_spectral)
    betas = np.linspace(0.0, max(2.0 * alpha, 1.0), 33)
    curve = spectral.lambda_curve(model, betas, cfg.tol_spectral)
    return {
        **_header(cfg),
        "alpha": alpha,
        "lambda_at_alpha": spectral.lambda_beta(model, alpha, cfg.tol_spectral),
        "lambda_curve": [list(p) for p in curve],
        "convexity_defects": spectral.convexity_defects(curve),
    }


def cmd_tail_constants(cfg: RunConfig, model) -> dict:
    if cfg.alpha in (None, "auto"):
        theory = spectral.theory_report(model, beta_max=cfg.beta_max,
                                        spectral_tol=cfg.tol_spectral, root_tol=cfg.tol_root)
        if theory.regime == "kesten" and not theory.degenerate.is_degenerate:
            raise spectral.NotContracting(
                f"Kesten regime (alpha = {theory.alpha:.10g}): rho(G_alpha) = 1, no closed-form tail constants"
            )
        if theory.regime == "none" and not theory.degenerate.is_degenerate:
            raise spectral.NoKestenExponent("; ".join(theory.notes) or "no tail exponent")
        return {
            **_header(cfg),
            "regime": theory.regime,
            "alpha": theory.alpha,
            "states": list(model.chain.states),
            "rho_G": theory.rho_G,
            "K": _vec(theory.K),
            "K_plus": _vec(theory.K_plus),
            "K_minus": _vec(theory.K_minus),
            "degenerate": theory.degenerate.is_degenerate,
            "notes": theory.notes,
        }
    alpha = _alpha_arg(cfg, model)
    signed = spectral.solve_signed_constants(model, alpha, cfg.tol_spectral)
    ops = spectral.build_operators(model, alpha)
    doc = {
        **_header(cfg),
        "alpha": alpha,
        "states": list(model.chain.states),
        "rho_G": spectral.spectral_radius(ops.G, cfg.tol_spectral),
        "K_plus": _vec(signed.K_plus),
        "K_minus": _vec(signed.K_minus),
    }
    if not np.any(ops.G_minus > 0):
        sol = spectral.solve_tail_constants(model, alpha, cfg.tol_spectral)
        doc["K"] = _vec(sol.K)
        doc["K_neumann"] = _vec(sol.K_neumann)
        doc["neumann_terms"] = sol.neumann_terms
    else:
        doc["K"] = _vec(signed.K_plus + signed.K_minus)
    return doc


def _sample(cfg: RunConfig, model):
    return simulate.stationary_sample(
        model, cfg.samples, cfg.method, cfg.seed, depth=cfg.depth, burn_in=cfg.burn_in,
        thin=cfg.thin, shards=cfg.shards, threads=cfg.threads,
    )


def cmd_simulate(cfg: RunConfig, model) -> None:
    sample = _sample(cfg, model)
    out = cfg.out or "samples.csv"
    write_samples_csv(sample, out)
    log.info("wrote %d samples to %s", len(sample), out)


def cmd_blocks(cfg: RunConfig, model) -> None:
    y_star = model.chain.states[0] if cfg.y_star is None else cfg.y_star
    blocks = simulate.regeneration_blocks(model, y_star, cfg.r, cfg.blocks, cfg.seed)
    out = cfg.out or "blocks.csv"
    write_blocks_csv(blocks, out)
    log.info("wrote %d blocks to %s", len(blocks), out)


def _estimate_doc(states, values, alpha, window, per_state) -> dict:
    h = estimate.hill(values)
    alpha_used = h.alpha_hat if alpha is None else alpha
    kind, (lo, hi) = window
    t_window = estimate.quantile_window(values, (lo, hi)) if kind == "q" else (lo, hi)
    K_hat = {}
    for sign in (1, -1):
        est = estimate.k_constant_estimate(values, alpha_used, t_window, sign, states, per_state)
        for key, k in est.items():
            K_hat.setdefault(str(key), {})["+1" if sign > 0 else "-1"] = k
    return {
        "alpha_hat": h.alpha_hat,
        "alpha_std_err": h.std_err,
        "k_used": h.k,
        "alpha_used": alpha_used,
        "K_hat": K_hat,
        "t_window": list(t_window),
        "n_samples": int(len(values)),
    }


def cmd_estimate(cfg: RunConfig) -> dict:
    try:
        states, values = read_samples_csv(cfg.input_path)
    except (OSError, ValueError) as exc:
        raise ModelFileError(str(cfg.input_path), str(exc)) from None
    alpha = None if cfg.alpha in (None, "auto") else _alpha_arg(cfg, None)
    return {**_header(cfg), **_estimate_doc(states, values, alpha, _window(cfg.window), cfg.per_state)}


REL_TOL_K = 0.15
ALPHA_TOL = 0.1
Z_MAX = 4.0


def cmd_report(cfg: RunConfig, model) -> dict:
    y_star = model.chain.states[0] if cfg.y_star is None else cfg.y_star
    theory = spectral.theory_report(model, beta_max=cfg.beta_max, y_star=y_star, r=cfg.r,
                                    spectral_tol=cfg.tol_spectral, root_tol=cfg.tol_root)
    sample = _sample(cfg, model)
    labels = np.array(model.chain.states, dtype=object)[sample.states]
    checks: dict = {}
    estimates: dict = {}

    if theory.degenerate.is_degenerate:
        gamma = theory.degenerate.Gamma
        bound = float(np.abs(gamma).max())
        on_gamma = bool(np.all(np.isin(sample.r, gamma)))
        beyond = estimate.empirical_tail(np.abs(sample.r), bound) if bound > 0 else float(np.any(sample.r != 0))
        estimates["tail_beyond_gamma"] = beyond
        estimates["distinct_values"] = int(np.unique(sample.r).size)
        checks["samples_on_gamma"] = on_gamma
        checks["zero_tail_beyond_gamma"] = beyond == 0.0
    elif theory.regime in ("grey", "kesten"):
        try:
            est = _estimate_doc(labels, sample.r, theory.alpha, ("q", (0.99, 0.9999)), True)
        except EstimateError as exc:
            estimates["error"] = str(exc)
            checks["estimation"] = False
        else:
            estimates.update(est)
            if theory.regime == "grey":
                for i, s in enumerate(model.chain.states):
                    for sign, vec in (("+1", theory.K_plus), ("-1", theory.K_minus)):
                        k_hat = est["K_hat"].get(str(s), {}).get(sign)
                        if k_hat is None:
                            continue
                        if vec[i] > 0:
                            ok = abs(k_hat.value - vec[i]) <= REL_TOL_K * vec[i]
                        else:
                            ok = k_hat.value <= Z_MAX * k_hat.std_err
                        checks[f"K[{s}][{sign}]"] = bool(ok)
            else:
                checks["hill_alpha"] = abs(est["alpha_hat"] - theory.alpha) <= ALPHA_TOL
                if any(law.m_law.moment(0.0, -1) > 0 for law in model.ordered_laws):
                    sym = estimate.symmetry_check(sample.r, theory.alpha)
                    estimates["symmetry"] = sym
                    checks["sign_symmetry"] = abs(sym.z) < Z_MAX

    return {
        **_header(cfg),
        "model": model_to_dict(model),
        "regime": theory.regime,
        "alpha": theory.alpha,
        "states": list(model.chain.states),
        "K": _vec(theory.K),
        "K_plus": _vec(theory.K_plus),
        "K_minus": _vec(theory.K_minus),
        "rho_G": theory.rho_G,
        "rho_H_alpha": theory.rho_H_alpha,
        "rho_Theta_alpha": theory.rho_Theta_alpha,
        "lambda_curve": [list(p) for p in theory.lambda_samples],
        "degenerate": {
            "is_degenerate": theory.degenerate.is_degenerate,
            "c": theory.degenerate.c,
            "Gamma": _vec(theory.degenerate.Gamma),
        },
        "notes": theory.notes,
        "simulation": {"method": sample.method, "samples": len(sample), "depth": sample.depth},
        "estimates": estimates,
        "checks": checks,
        "pass": all(checks.values()) if checks else None,
    }


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the process exit code."""
    try:
        if cfg.command == "estimate":
            _emit(cmd_estimate(cfg), cfg.json_out)
            return 0
        if cfg.model_path is None:
            raise ModelFileError("--model", "a model file is required")
        model = load_model(cfg.model_path)
        if cfg.command == "check":
            _emit(cmd_check(cfg, model), cfg.out)
        elif cfg.command == "solve-alpha":
            _emit(cmd_solve_alpha(cfg, model), cfg.out)
        elif cfg.command == "tail-constants":
            _emit(cmd_tail_constants(cfg, model), cfg.out)
        elif cfg.command == "simulate":
            cmd_simulate(cfg, model)
        elif cfg.command == "blocks":
            cmd_blocks(cfg, model)
        elif cfg.command == "report":
            _emit(cmd_report(cfg, model), cfg.json_out)
    except (ModelError, EstimateError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SpectralError as exc:
        print(f"regime error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    except SimError as exc:
        print(f"simulation error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
