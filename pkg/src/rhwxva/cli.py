"""Command-line interface: ``rhwxva {calibrate,exposure,xva,density}``.

Every CSV written here starts with a ``#`` metadata line (package version,
seeds, configuration hash) followed by a header row. Output is a pure
function of the inputs and flags.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import re
import sys

import numpy as np

from . import __version__
from .curve import YieldCurve
from .exceptions import CalibrationFailure, MissingEntry, RhwError, SeedCollision
from .hw import (
    PAYER,
    RECEIVER,
    HwParams,
    PiecewiseVol,
    SwapSpec,
    hw_calibrate_mean_reversion,
    hw_calibrate_vol,
    hw_swaption,
)
from .market import VolSurface, forward_swap_rate
from .mathkit import QuadratureSet
from .pipeline import RunConfig, run_bermudan_exposure, run_swap_exposure, xva_summary
from .products import BermudanSpec
from .rhw import RhwModel, as_mixture, node_pdfs, rand_cdf, rand_pdf, rhw_calibrate, rhw_swaption
from .xva import ExposureProfile

log = logging.getLogger(__name__)

OBJECTIVE_TOL = 1e-12


class InputError(RhwError):
    """Unusable input file or inconsistent flags (exit code 1)."""


def _fmt(x) -> str:
    return repr(float(x))


def config_hash(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _metadata(seeds: str, chash: str) -> str:
    return f"# rhwxva {__version__} seeds={seeds} config_hash={chash}\n"


def _write_csv(path, meta, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(meta)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


# ---------------------------------------------------------------------------
# model and instrument files


def model_to_dict(model, extra=None) -> dict:
    if isinstance(model, HwParams):
        out = {"model": "hw", "theta": model.theta}
    else:
        out = {
            "model": "rhw",
            "a_hat": model.a_hat,
            "b_hat": model.b_hat,
            "thetas": model.thetas.tolist(),
            "weights": model.weights.tolist(),
        }
    out["vol"] = model.vol.to_dict()
    out["curve"] = model.curve.to_dict()
    if extra:
        out.update(extra)
    return out


def model_from_dict(data: dict):
    try:
        curve = YieldCurve(data["curve"]["times"], data["curve"]["zero_rates"])
        vol = PiecewiseVol(data["vol"]["pillars"], data["vol"]["values"])
        if data["model"] == "hw":
            return HwParams(data["theta"], vol, curve)
        if data["model"] == "rhw":
            quad = QuadratureSet(np.array(data["thetas"]), np.array(data["weights"]))
            return RhwModel(quad, vol, curve, data.get("a_hat"), data.get("b_hat"))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed model file: {exc}") from exc
    raise InputError(f"unknown model type {data.get('model')!r}")


def load_model(path):
    try:
        with open(path) as fh:
            return model_from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read model file {path}: {exc}") from exc


_ATM_RE = re.compile(r"^\s*([0-9.eE+-]+)\s*\*\s*ATM\s*$")


def parse_strike(value, curve, swap: SwapSpec) -> float:
    """Absolute strike, or ``"<m>*ATM"`` relative to the curve's forward swap rate."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    if text.upper() == "ATM":
        return forward_swap_rate(curve, swap)[0]
    m = _ATM_RE.match(text)
    if m:
        return float(m.group(1)) * forward_swap_rate(curve, swap)[0]
    try:
        return float(text)
    except ValueError:
        raise InputError(f"cannot parse strike {value!r}") from None


def instrument_from_dict(data: dict, curve):
    """Swap or Bermudan swaption from its JSON description.

    Keys: ``type`` (swap | bermudan), ``swap_type`` (payer | receiver),
    ``start``, ``maturity``, ``frequency``, ``strike``, ``notional`` and for
    Bermudans ``exercise_dates`` (list, default every reset date after the start).
    """
    try:
        kind = data.get("type", "swap")
        side = {"payer": PAYER, "receiver": RECEIVER}[data.get("swap_type", "receiver")]
        swap = SwapSpec.from_schedule(float(data.get("start", 0.0)), float(data["maturity"]),
                                      float(data.get("frequency", 1.0)), 0.0, side,
                                      float(data.get("notional", 1.0)))
        swap = swap.with_strike(parse_strike(data.get("strike", "ATM"), curve, swap))
        if kind == "swap":
            return swap
        if kind == "bermudan":
            ex = data.get("exercise_dates")
            ex = swap.reset_dates[1:] if ex is None else np.asarray(ex, dtype=float)
            return BermudanSpec(swap, ex)
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed instrument: {exc}") from exc
    raise InputError(f"unknown instrument type {kind!r}")


def load_instrument(path, curve):
    try:
        with open(path) as fh:
            return instrument_from_dict(json.load(fh), curve)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read instrument file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# commands


def _check_coverage(surface: VolSurface, T_cot, strikes):
    expiries = [e for e in surface.expiries() if e < T_cot - 1e-9]
    if not expiries:
        raise InputError(f"surface has no expiries before the co-terminal date {T_cot:g}")
    for e in expiries:
        for k in strikes:
            try:
                surface.get(e, T_cot - e, k)
            except MissingEntry:
                raise InputError(
                    f"missing co-terminal quote (expiry={e:g}, tenor={T_cot - e:g}, strike_ratio={k:g})"
                ) from None
    return expiries


def cmd_calibrate(curve_path, surface_path, model_out, report_out, config: RunConfig) -> int:
    """Calibrate HW or rHW; write the model JSON and a fit report. Returns the exit code."""
    curve = YieldCurve.from_csv(curve_path)
    surface = VolSurface.from_csv(surface_path)
    T_cot = config.coterminal
    strikes = (1.0,) if config.model == "hw" else config.strike_ratios
    _check_coverage(surface, T_cot, strikes)
    if config.model == "hw":
        theta = hw_calibrate_mean_reversion(curve, surface, T_cot)
        model = HwParams(theta, hw_calibrate_vol(curve, surface, theta, T_cot), curve)
        price = lambda spec, T: hw_swaption(model, spec, T)  # noqa: E731
    else:
        model = rhw_calibrate(curve, surface, config.n_quad, T_cot, config.strike_ratios)
        price = lambda spec, T: rhw_swaption(model, spec, T)  # noqa: E731
    rows, errors = [], []
    for q in surface.coterminal_quotes(T_cot, strikes):
        spec = surface.underlying(curve, q)
        mv = surface.implied_vol(curve, q, price(spec, q.expiry))
        errors.append(mv - q.implied_vol)
        rows.append(["instrument", q.expiry, q.tenor, q.strike_ratio, q.implied_vol, mv, mv - q.implied_vol])
    objective = float(np.mean(np.square(errors)))
    mix = as_mixture(model)
    for w, th in zip(mix.weights, mix.thetas):
        rows.append(["node", "", "", "", w, th, ""])
    for p, v in zip(model.vol.pillars, model.vol.values):
        rows.append(["vol", p, "", "", v, "", ""])
    chash = config_hash(config.to_dict(), _file_digest(curve_path), _file_digest(surface_path))
    meta = _metadata("none", chash)
    with open(model_out, "w") as fh:
        json.dump(model_to_dict(model, {"objective": objective, "coterminal": T_cot,
                                        "version": __version__, "config_hash": chash}),
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_csv(report_out, meta,
               ["kind", "expiry", "tenor", "strike_ratio", "market_or_weight",
                "model_or_theta", "error"], rows)
    return 0 if objective < OBJECTIVE_TOL else 2


def _profile_rows(profile: ExposureProfile):
    rows = []
    alphas = sorted(profile.pfe)
    for i, t in enumerate(profile.dates):
        row = [t, profile.epe[i], profile.ene[i]]
        row += [profile.pfe[a][i] for a in alphas]
        row += [profile.pfl[100.0 - a][i] for a in alphas]
        rows.append(row)
    header = ["t", "EPE", "ENE"] + [f"PFE_{a:g}" for a in alphas] + [f"PFL_{100 - a:g}" for a in alphas]
    return header, rows


def run_exposure(model_path, instrument_path, config: RunConfig):
    model = load_model(model_path)
    if config.model == "hw" and not isinstance(model, HwParams):
        raise InputError("--model hw given but the model file holds an rHW model")
    instrument = load_instrument(instrument_path, model.curve)
    if isinstance(instrument, BermudanSpec):
        return run_bermudan_exposure(model, instrument, config)
    return run_swap_exposure(model, instrument, config)


def cmd_exposure(model_path, instrument_path, profile_out, config: RunConfig) -> int:
    result = run_exposure(model_path, instrument_path, config)
    chash = config_hash(config.to_dict(), _file_digest(model_path), _file_digest(instrument_path))
    header, rows = _profile_rows(result.profile)
    _write_csv(profile_out, _metadata(f"zcb:{config.seed_zcb},val:{config.seed_val}", chash), header, rows)
    return 0


def read_profile(path) -> ExposureProfile:
    try:
        with open(path, newline="") as fh:
            lines = [line for line in fh if not line.startswith("#")]
        reader = csv.reader(lines)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader if row])
    except (OSError, StopIteration, ValueError) as exc:
        raise InputError(f"malformed profile {path}: {exc}") from exc
    if data.ndim != 2 or header[:3] != ["t", "EPE", "ENE"] or data.shape[1] != len(header):
        raise InputError(f"malformed profile {path}: unexpected columns {header}")
    pfe = {float(h[4:]): data[:, j] for j, h in enumerate(header) if h.startswith("PFE_")}
    pfl = {float(h[4:]): data[:, j] for j, h in enumerate(header) if h.startswith("PFL_")}
    return ExposureProfile(data[:, 0], data[:, 1], data[:, 2], pfe, pfl)


def cmd_xva(profile_path, xva_out, config: RunConfig, model_path=None, instrument_path=None) -> int:
    """xVA from a profile CSV, or from a full pipeline run when no profile is given."""
    if profile_path is not None:
        profile = read_profile(profile_path)
        parts = [_file_digest(profile_path)]
        seeds = "from-profile"
    else:
        profile = run_exposure(model_path, instrument_path, config).profile
        parts = [_file_digest(model_path), _file_digest(instrument_path)]
        seeds = f"zcb:{config.seed_zcb},val:{config.seed_val}"
    res = xva_summary(profile, config)
    chash = config_hash(config.to_dict(), *parts)
    meta = (_metadata(seeds, chash).rstrip("\n")
            + f" hazard_cpty={config.hazard_cpty!r} hazard_self={config.hazard_self!r}"
            + f" recovery={config.recovery!r}"
            + ("\n" if profile_path is not None else f" paths_val={config.paths_val}\n"))
    _write_csv(xva_out, meta, ["CVA", "DVA", "BCVA"], [[res["CVA"], res["DVA"], res["BCVA"]]])
    return 0


def cmd_density(model_path, t, grid, density_out) -> int:
    model = as_mixture(load_model(model_path))
    ys = np.asarray(grid, dtype=float)
    pdf = rand_pdf(model, t, ys)
    cdf = rand_cdf(model, t, ys)
    nodes = node_pdfs(model, t, ys)
    header = ["y", "pdf", "cdf"] + [f"pdf_node{n + 1}" for n in range(len(model))]
    rows = [[y, p, c, *nodes[:, i]] for i, (y, p, c) in enumerate(zip(ys, pdf, cdf))]
    chash = config_hash(_file_digest(model_path), float(t), ys.tolist())
    _write_csv(density_out, _metadata("none", chash), header, rows)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _grid(text):
    lo, hi, n = text.split(":")
    return np.linspace(float(lo), float(hi), int(n))


def _add_run_flags(p):
    p.add_argument("--model", choices=["hw", "rhw"], default="rhw")
    p.add_argument("--n-quad", type=int, default=5)
    p.add_argument("--coterminal", type=float, default=30.0)
    p.add_argument("--strikes", type=_floats, default=(0.5, 0.75, 1.0, 1.25, 1.5),
                   help="comma-separated strike ratios for the rHW smile fit")
    p.add_argument("--paths-zcb", type=int, default=10_000)
    p.add_argument("--paths-val", type=int, default=10_000)
    p.add_argument("--steps-per-year", type=float, default=200.0)
    p.add_argument("--monitor-per-year", type=float, default=20.0)
    p.add_argument("--seed-zcb", type=int, default=1)
    p.add_argument("--seed-val", type=int, default=2)
    p.add_argument("--alpha", type=_floats, default=(99.0,), help="PFE levels, e.g. 95,99")
    p.add_argument("--hazard-cpty", type=float, default=0.02)
    p.add_argument("--hazard-self", type=float, default=0.01)
    p.add_argument("--recovery", type=float, default=0.0)
    p.add_argument("--degree-zcb", type=int, default=3)
    p.add_argument("--degree-lsmc", type=int, default=2)
    p.add_argument("--n-colloc", type=int, default=5)
    p.add_argument("--zcb", choices=["auto", "analytic", "regression"], default="auto",
                   help="bond prices for HW models: analytic (auto) or regression table")


def _config(args) -> RunConfig:
    return RunConfig(
        model=args.model, n_quad=args.n_quad, coterminal=args.coterminal,
        strike_ratios=args.strikes, paths_zcb=args.paths_zcb, paths_val=args.paths_val,
        steps_per_year=args.steps_per_year, monitor_per_year=args.monitor_per_year,
        seed_zcb=args.seed_zcb, seed_val=args.seed_val, alphas=args.alpha,
        hazard_cpty=args.hazard_cpty, hazard_self=args.hazard_self, recovery=args.recovery,
        degree_zcb=args.degree_zcb, degree_lsmc=args.degree_lsmc, n_colloc=args.n_colloc,
        zcb=args.zcb,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rhwxva", description="Randomized Hull-White xVA toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="calibrate HW or rHW to a swaption surface")
    p.add_argument("curve")
    p.add_argument("surface")
    p.add_argument("--out-model", default="model.json")
    p.add_argument("--out-report", default="report.csv")
    _add_run_flags(p)

    p = sub.add_parser("exposure", help="exposure profile of a swap or Bermudan")
    p.add_argument("model_file")
    p.add_argument("instrument")
    p.add_argument("--out", default="profile.csv")
    _add_run_flags(p)

    p = sub.add_parser("xva", help="CVA/DVA/BCVA from a profile or a full run")
    p.add_argument("--profile")
    p.add_argument("--model-file")
    p.add_argument("--instrument")
    p.add_argument("--out", default="xva.csv")
    _add_run_flags(p)

    p = sub.add_parser("density", help="mixture density of the short rate")
    p.add_argument("model_file")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--grid", type=_grid, default=None, help="lo:hi:n (default: mean +- 8 sd)")
    p.add_argument("--out", default="density.csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "calibrate":
            return cmd_calibrate(args.curve, args.surface, args.out_model, args.out_report, _config(args))
        if args.command == "exposure":
            return cmd_exposure(args.model_file, args.instrument, args.out, _config(args))
        if args.command == "xva":
            if args.profile is None and (args.model_file is None or args.instrument is None):
                raise InputError("xva needs --profile or both --model-file and --instrument")
            return cmd_xva(args.profile, args.out, _config(args), args.model_file, args.instrument)
        if args.command == "density":
            grid = args.grid
            if grid is None:
                from .rhw import rand_moment

                model = as_mixture(load_model(args.model_file))
                mean = rand_moment(model, 1, args.t)
                sd = np.sqrt(max(rand_moment(model, 2, args.t) - mean**2, 0.0))
                grid = np.linspace(mean - 8 * sd, mean + 8 * sd, 801)
            return cmd_density(args.model_file, args.t, grid, args.out)
    except SeedCollision as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InputError, MissingEntry, CalibrationFailure, RhwError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
