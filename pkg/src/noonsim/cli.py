"""Command-line interface: ``noonsim build|scan|fit|background|reproduce``."""

from __future__ import annotations

import functools
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from .background import (
    ALL_CHANNELS,
    DEFAULT_CHANNELS,
    BackgroundError,
    SourceRates,
    accidental_channels,
    background_decomposition,
    triple_detectors,
)
from .construction import (
    CIRCULAR,
    LINEAR,
    REFERENCE_SUCCESS,
    ChainConfig,
    NoonSpec,
    build_noon_target,
    run_paper_chain,
)
from .detection import AnalyzerConfig, DetectionError, DetectionPattern
from .elements import ElementError, parse_circuit
from .experiment import DEFAULT_SEED, PRESETS, PhaseScan, default_model, reproduce, scan
from .fock import FockError, fidelity_up_to_global_phase
from .fringes import AliasingError, FringeData, FringeDataError, fit_fringe, fourier_decompose

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(click.ClickException):
    exit_code = EXIT_CONFIG


class NumericError(click.ClickException):
    exit_code = EXIT_NUMERIC


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def _emit(text: str, out: str | None) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _pick(local, ctx: click.Context, key: str):
    return local if local is not None else ctx.obj.get(key)


def _guard(fn):
    """Map library errors onto exit codes 2 (configuration) and 3 (numerics)."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except AliasingError as exc:
            raise NumericError(str(exc)) from exc
        except FringeDataError as exc:
            raise NumericError(str(exc)) from exc
        except (FockError, ElementError, DetectionError, BackgroundError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            raise NumericError(str(exc)) from exc

    return wrapper


@click.group()
@click.option("--seed", type=int, default=None, help="Default RNG seed for sampling commands.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Default JSON config for commands that accept one.")
@click.option("--out", type=click.Path(), default=None, help="Default output path.")
@click.pass_context
def main(ctx: click.Context, seed, config_path, out):
    """Simulate post-selected three-photon NOON-state super-resolution.

    Angles on the command line are in degrees; they are stored in radians.
    Exit codes: 0 success, 2 configuration error, 3 numeric or aliasing error.
    """
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, config=config_path, out=out)


@main.command()
@click.option("--n", "n", type=int, default=3, show_default=True, help="Photon number N (1 <= N <= n_max).")
@click.option("--chain/--no-chain", default=True, show_default=True,
              help="For N=3 also run the optical chain and report its stage log.")
@click.option("--n-max", type=int, default=6, show_default=True, help="Per-mode photon cap.")
@click.option("--chi-deg", type=float, default=None, help="Phase increment chi in degrees (default 360/N).")
@click.option("--basis", type=click.Choice([LINEAR, CIRCULAR]), default=LINEAR, show_default=True)
@click.option("--phi-deg", type=float, default=0.0, show_default=True, help="Chain phase setting in degrees.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="Chain config JSON.")
@click.option("--out", type=click.Path(), default=None, help="Output JSON (default stdout).")
@click.pass_context
@_guard
def build(ctx, n, chain, n_max, chi_deg, basis, phi_deg, config_path, out):
    """Write the NOON target state and, for N=3, the chain result as JSON."""
    chi = None if chi_deg is None else math.radians(chi_deg)
    target = build_noon_target(NoonSpec(n, chi, basis, n_max))
    payload = {"n": n, "target": target.to_dict()}
    if chain and n == 3:
        cfg = ChainConfig.from_dict({**_load_json(_pick(config_path, ctx, "config")), "n_max": n_max})
        result = run_paper_chain(math.radians(phi_deg), cfg)
        payload["chain"] = result.to_dict(with_intermediates=False)
        payload["chain"]["fidelity"] = fidelity_up_to_global_phase(result.state, build_noon_target(NoonSpec(3, n_max=n_max)))
        payload["chain"]["reference_success"] = REFERENCE_SUCCESS
    _emit(_dumps(payload), _pick(out, ctx, "out"))


def _scan_setup(cfg: dict, preset: str | None):
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; valid presets: {', '.join(PRESETS)}")
        p = PRESETS[preset]
        if p.pattern is None:
            raise ConfigError(f"preset {preset} is not a coincidence scan; use 'reproduce'")
        analyzer, pattern, interval = p.analyzer, p.pattern, p.interval
    else:
        analyzer = AnalyzerConfig.from_dict(cfg.get("analyzer", {}))
        pattern = DetectionPattern(*cfg.get("pattern", (2, 1)))
        interval = None
    scan_cfg = dict(cfg.get("scan", {}))
    if interval is not None:
        scan_cfg.setdefault("interval_s", interval)
    return analyzer, pattern, scan_cfg


@main.command("scan")
@click.option("--preset", default=None, help=f"Detection setup preset ({', '.join(PRESETS)}).")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Scan config JSON (chain, analyzer, pattern, scan, circuit, rates, scale).")
@click.option("--rates", type=click.Path(dir_okay=False), default=None, help="Source rates JSON for accidentals.")
@click.option("--count", type=int, default=None, help="Number of phase points.")
@click.option("--start-deg", type=float, default=None)
@click.option("--stop-deg", type=float, default=None)
@click.option("--interval", type=float, default=None, help="Counting interval in seconds.")
@click.option("--scale", type=float, default=None, help="Events per interval (default: calibrated).")
@click.option("--seed", type=int, default=None, help="Poisson seed; omit for expected counts only.")
@click.option("--out", type=click.Path(), default=None, help="Output CSV.")
@click.pass_context
@_guard
def scan_cmd(ctx, preset, config_path, rates, count, start_deg, stop_deg, interval, scale, seed, out):
    """Coincidence counts versus birefringent phase, as CSV."""
    cfg = _load_json(_pick(config_path, ctx, "config"))
    analyzer, pattern, scan_cfg = _scan_setup(cfg, preset)
    for key, val in (("count", count), ("start_deg", start_deg), ("stop_deg", stop_deg), ("interval_s", interval)):
        if val is not None:
            scan_cfg[key] = val
    seed = _pick(seed, ctx, "seed")
    if seed is not None:
        scan_cfg["seed"] = seed
    phase_scan = PhaseScan.from_dict(scan_cfg)
    rates_data = _load_json(rates) if rates is not None else cfg.get("rates")
    source_rates = SourceRates.from_dict(rates_data) if rates_data else None
    circuit = parse_circuit(cfg["circuit"]) if "circuit" in cfg else None
    data = scan(
        ChainConfig.from_dict(cfg.get("chain", {})), analyzer, pattern, phase_scan, source_rates,
        scale if scale is not None else cfg.get("scale"), circuit,
    )
    _emit(data.to_csv(), _pick(out, ctx, "out"))


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Fringe CSV written by 'scan' or 'reproduce'.")
@click.option("--k", "k", type=int, default=3, show_default=True, help="Fitted harmonic.")
@click.option("--harmonics", default="0,1,2,3", show_default=True, help="Harmonics reported in the decomposition.")
@click.option("--out", type=click.Path(), default=None, help="Output JSON.")
@click.pass_context
@_guard
def fit(ctx, input_path, k, harmonics, out):
    """Fit A + B cos(k phi + delta) and report the harmonic content."""
    data = FringeData.from_csv(Path(input_path).read_text())
    ks = tuple(int(h) for h in harmonics.split(","))
    result = fit_fringe(data, k)
    payload = {"fit": result.to_dict(), "decomposition": fourier_decompose(data.phi, data.counts, ks).to_dict()}
    _emit(_dumps(payload), _pick(out, ctx, "out"))


@main.command()
@click.option("--rates", type=click.Path(dir_okay=False), default=None,
              help="Source rates JSON (default: calibrated operating point).")
@click.option("--basis-deg", type=float, default=45.0, show_default=True)
@click.option("--detectors", nargs=2, type=int, default=(2, 1), show_default=True)
@click.option("--interval", type=float, default=None, help="Counting interval in seconds.")
@click.option("--channels", default=",".join(DEFAULT_CHANNELS), show_default=True,
              help=f"Comma-separated accidental channels from {', '.join(ALL_CHANNELS)}.")
@click.option("--count", type=int, default=60, show_default=True)
@click.option("--emit-rates", type=click.Path(dir_okay=False), default=None,
              help="Also write the rates used to this file.")
@click.option("--out", type=click.Path(), default=None, help="Output JSON.")
@click.pass_context
@_guard
def background(ctx, rates, basis_deg, detectors, interval, channels, count, emit_rates, out):
    """Harmonic decomposition of the accidental three-fold background."""
    analyzer = AnalyzerConfig(math.radians(basis_deg), *detectors)
    if rates is not None:
        source_rates = SourceRates.from_dict(_load_json(rates))
    else:
        source_rates = default_model().rates(analyzer)
    if interval is not None:
        source_rates = source_rates.with_interval(interval)
    chans = tuple(c for c in channels.split(",") if c)
    dec = background_decomposition(source_rates, analyzer, count, chans)
    grid = PhaseScan(count=count).phi
    parts = accidental_channels(source_rates, grid, triple_detectors(analyzer))
    payload = {
        "interval_s": source_rates.counting_interval,
        "channels": list(chans),
        "decomposition": dec.to_dict(),
        "all_channel_means": {c: float(np.mean(parts[c])) for c in sorted(parts)},
    }
    if emit_rates is not None:
        _emit(_dumps(source_rates.to_dict()), emit_rates)
    _emit(_dumps(payload), _pick(out, ctx, "out"))


@main.command("reproduce")
@click.argument("preset")
@click.option("--seed", type=int, default=None, help=f"Poisson seed (default {DEFAULT_SEED}).")
@click.option("--count", type=int, default=60, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")
@click.pass_context
@_guard
def reproduce_cmd(ctx, preset, seed, count, out):
    """Simulate a preset panel and write data, fits and decompositions."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; valid presets: {', '.join(PRESETS)}")
    seed = _pick(seed, ctx, "seed")
    bundle = reproduce(preset, DEFAULT_SEED if seed is None else seed, count=count)
    out_dir = _pick(out, ctx, "out") or f"reproduce-{preset}"
    for path in bundle.write(out_dir):
        click.echo(str(path))
    f = bundle.fit
    click.echo(f"{preset}: k={f.k} visibility={f.visibility:.4f} +/- {f.visibility_err:.4f}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
