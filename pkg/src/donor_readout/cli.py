"""Command-line scenario runner.

Every subcommand reads an optional JSON config, writes ``<name>.csv`` and
``<name>.json`` into the output directory, and exits 0 on success, 2 on a
config error and 3 on a numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, dynamics, observables, readout, spectra
from .config import ConfigError, ScenarioConfig, load_config
from .levels import (
    classify_fir,
    hydrogenic_binding,
    mev_to_thz,
    scaled_rydberg,
    transition_1s_2p,
)

log = logging.getLogger("donor_readout")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class NumericalFailure(RuntimeError):
    """Raised after outputs are written when a result did not converge."""


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class Run:
    def __init__(self, name: str, cfg: ScenarioConfig, out: Path, deterministic: bool):
        self.name, self.cfg, self.out, self.deterministic = name, cfg, out, deterministic

    def write_csv(self, text: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / f"{self.name}.csv"
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
        return path

    def write_json(self, results: dict) -> Path:
        payload = {
            "command": self.name,
            "version": __version__,
            "seed": self.cfg.seed,
            "config": self.cfg.model_dump(mode="json"),
            "results": results,
        }
        if not self.deterministic:
            payload["generated_at"] = datetime.now(timezone.utc).isoformat()
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / f"{self.name}.json"
        with open(path, "w", newline="\n") as fh:
            fh.write(json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n")
        return path


def cmd_levels(run: Run) -> dict:
    cfg = run.cfg
    material = cfg.material_params()
    scheme = cfg.level_scheme()
    fir = cfg.rates.fir
    rows, classes = [], []
    for e in cfg.levels.fir_photons_mev:
        c = classify_fir(e, scheme, fir.resonance_window, fir.detuning_span)
        rows.append((e, mev_to_thz(e), c.value))
        classes.append({"photon_meV": e, "photon_THz": mev_to_thz(e), "class": c.value})
    run.write_csv(_csv_text(["photon_meV", "photon_THz", "classification"], rows))
    results = {
        "binding_meV": scaled_rydberg(material),
        "binding_hydrogenic_meV": hydrogenic_binding(material),
        "binding_THz": mev_to_thz(scaled_rydberg(material)),
        "e_1s_2p_meV": scheme.e_1s_2p,
        "e_1s_2p_THz": mev_to_thz(scheme.e_1s_2p),
        "e_1s_2p_hydrogenic_meV": transition_1s_2p(hydrogenic_binding(material)),
        "fir_classification": classes,
    }
    run.write_json(results)
    print(json.dumps(results, indent=2))
    return results


def _grid(cfg: ScenarioConfig):
    s = cfg.spectrum
    try:
        return spectra.make_grid(s.e_min, s.e_max, s.step)
    except ValueError as exc:
        raise ConfigError(f"spectrum: {exc}") from exc


def _settings(cfg: ScenarioConfig, table, rp, grid) -> spectra.SynthSettings:
    settings = cfg.synth_settings()
    if cfg.spectrum.calibrate_gain:
        gain = spectra.calibrate_elastic_gain(table, rp, grid, settings)
        settings = cfg.synth_settings(elastic_gain=gain)
    return settings


def cmd_spectrum(run: Run) -> dict:
    cfg = run.cfg
    table, rp, grid = cfg.peak_table(), cfg.rate_params(), _grid(cfg)
    settings = _settings(cfg, table, rp, grid)
    s = cfg.spectrum
    pops = dynamics.Populations.ground()
    try:
        emitted = spectra.synth_spectrum(table, s.excitation_ev, s.mode, pops, rp, grid, settings)
    except ValueError as exc:
        raise ConfigError(f"spectrum: {exc}") from exc
    run.write_csv(emitted.to_csv())
    direct = spectra.integrate_region(emitted, *spectra.DIRECT_REGION)
    tes = spectra.integrate_region(emitted, *spectra.TES_REGION)
    report = spectra.fidelity_report(table, pops, rp, grid, settings)
    results = {
        "mode": s.mode,
        "excitation_eV": s.excitation_ev,
        "elastic_gain": settings.elastic_gain,
        "direct_region_area": direct,
        "tes_region_area": tes,
        "direct_to_tes_ratio": direct / tes if tes > 0 else None,
        "off_resonant_ratio": report.off_resonant_ratio,
        "resonant_ratio": report.resonant_ratio,
        "resonant_direct_gain": report.direct_gain,
    }
    run.write_json(results)
    return results


def cmd_scan(run: Run) -> dict:
    cfg = run.cfg
    table, rp, sc = cfg.peak_table(), cfg.rate_params(), cfg.scan
    if not sc.stop > sc.start or not sc.step > 0:
        raise ConfigError("scan: need stop > start and step > 0")
    energies = sc.start + sc.step * np.arange(int(round((sc.stop - sc.start) / sc.step)) + 1)
    settings = cfg.synth_settings()
    if sc.self_consistent:
        points = spectra.excitation_scan(table, energies, rp, scheme=cfg.level_scheme(), settings=settings)
    else:
        points = spectra.excitation_scan(table, energies, rp, pops=dynamics.Populations.ground(),
                                         settings=settings)
    run.write_csv(_csv_text(["excitation_eV", "rels_height"], points))
    heights = np.array([h for _, h in points])
    results = {
        "n_points": len(points),
        "max_height": float(heights.max()),
        "max_at_eV": float(energies[int(np.argmax(heights))]),
    }
    run.write_json(results)
    return results


def cmd_deplete(run: Run) -> dict:
    cfg = run.cfg
    scheme, rp = cfg.level_scheme(), cfg.rate_params()
    target = cfg.deplete.calibrate
    if target is not None:
        try:
            d_max, i_d = observables.saturation_to_depletion(target.A, target.I0)
            rp = dynamics.calibrate_ionizing_drive(scheme, rp, d_max, i_d)
        except ValueError as exc:
            raise ConfigError(f"deplete.calibrate: {exc}") from exc
    try:
        curve = dynamics.depletion_curve(scheme, rp, cfg.deplete.intensities)
    except ValueError as exc:
        raise ConfigError(f"deplete: {exc}") from exc
    rows = [(i, d, observables.depletion_to_modulation(d)) for i, d in curve]
    run.write_csv(_csv_text(["intensity_mW_cm2", "depletion", "modulation_percent"], rows))
    results = {
        "sat_intensity_ionize": rp.fir.sat_intensity_ionize,
        "overlap": rp.fir.overlap,
        "max_modulation_percent": max(m for _, _, m in rows) if rows else 0.0,
    }
    nonzero = [(i, m) for i, _, m in rows]
    if len({i for i, _ in nonzero}) >= 3 and any(i > 0 for i, _ in nonzero):
        fit = observables.fit_saturation(nonzero)
        results["modulation_fit"] = fit.to_dict()
    run.write_json(results)
    return results


def _load_points(path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    pts = []
    for row in rows[1:]:
        if row:
            pts.append((float(row[0]), float(row[1])))
    return pts


def cmd_satfit(run: Run) -> dict:
    cfg = run.cfg
    sf = cfg.satfit
    if sf.points is not None:
        points, source = [tuple(p) for p in sf.points], "config"
    elif sf.data is not None:
        try:
            points, source = _load_points(sf.data), sf.data
        except (OSError, ValueError, IndexError) as exc:
            raise ConfigError(f"satfit.data: {exc}") from exc
    else:
        ref = resources.files("donor_readout") / "data" / "modulation_vs_fir.csv"
        with resources.as_file(ref) as p:
            points, source = _load_points(p), "bundled:modulation_vs_fir.csv"
    try:
        fit = observables.fit_saturation(points)
    except observables.DegenerateDataError as exc:
        raise NumericalFailure(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(f"satfit: {exc}") from exc
    rows = [(i, m, observables.saturation_model(i, fit.A, fit.I0) if fit.I0 > 0 else 0.0)
            for i, m in points]
    run.write_csv(_csv_text(["intensity_mW_cm2", "modulation_percent", "fit_percent"], rows))
    results = {**fit.to_dict(), "source": source, "n_points": len(points)}
    run.write_json(results)
    if not fit.converged:
        raise NumericalFailure("saturation fit did not converge")
    return results


def cmd_readout(run: Run) -> dict:
    cfg = run.cfg
    rc = cfg.readout_config()
    hist = readout.photon_histograms(rc, workers=cfg.readout.workers)
    result = readout.choose_threshold(hist)
    run.write_csv(hist.to_csv())
    results = {
        **result.to_dict(),
        "n_trials": rc.n_trials,
        "window_ns": rc.window,
        "collection_efficiency": rc.collection_efficiency,
        "mean_bright": hist.mean("bright"),
        "stderr_bright": hist.standard_error("bright"),
        "mean_dark": hist.mean("dark"),
        "expected_bright": readout.expected_photons(rc),
        "scattered_photons_per_s": dynamics.scattered_photon_rate(rc.rates.nir, rc.rates.tau_d0x) * 1e9,
    }
    run.write_json(results)
    return results


def cmd_thermal(run: Run) -> dict:
    th = run.cfg.thermal
    try:
        rise = observables.thermal_rise(th.p_abs, th.tau, th.mass, th.c_p)
        rows = [(t, observables.temperature_scale(t)) for t in th.temperatures]
    except ValueError as exc:
        raise ConfigError(f"thermal: {exc}") from exc
    run.write_csv(_csv_text(["temperature_K", "rels_efficiency"], rows))
    results = {
        "delta_T_K": rise,
        "rels_efficiency_after_rise_from_5K": observables.temperature_scale(5.0 + rise),
    }
    run.write_json(results)
    return results


COMMANDS = {
    "levels": (cmd_levels, "donor level scheme and THz photon classification"),
    "spectrum": (cmd_spectrum, "synthesize a PL or RELS emission spectrum"),
    "scan": (cmd_scan, "RELS peak height versus excitation energy"),
    "deplete": (cmd_deplete, "ground-state depletion and RELS modulation versus THz intensity"),
    "satfit": (cmd_satfit, "fit the saturation curve to modulation data"),
    "readout": (cmd_readout, "Monte Carlo single-donor readout"),
    "thermal": (cmd_thermal, "lattice heating estimate and RELS temperature scaling"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON scenario config")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--deterministic", action="store_true",
                        help="omit timestamps so outputs are byte-identical across runs")
    common.add_argument("--trials", type=int, help="override readout.n_trials")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="donor-readout", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        updates = {}
        if args.seed is not None:
            updates["seed"] = args.seed
        if args.trials is not None:
            if args.trials < 1:
                raise ConfigError("--trials must be >= 1")
            updates["readout"] = cfg.readout.model_copy(update={"n_trials": args.trials})
        if updates:
            cfg = cfg.model_copy(update=updates)
        func, _ = COMMANDS[args.command]
        func(Run(args.command, cfg, args.out, args.deterministic))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, dynamics.SingularChainError, dynamics.StabilityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    log.info("wrote %s outputs to %s", args.command, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
