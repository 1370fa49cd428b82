"""Experiment orchestration: config parsing, pipelines, figure-data emission.

Every subcommand resolves an ExperimentConfig (defaults < TOML config
file < command-line flags), runs its pipeline, and writes artifacts
plus a manifest into the output directory.  The pipeline functions are
plain importable callables so the same code paths back both the CLI
and the test suite.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from ._kernels import set_threads
from .errors import ParameterError
from .grids import Sinogram, uniform_angles
from .io import export_pgm, write_csv, write_raster
from .metrics import lta_interior_ssim, ssim
from .phantom import generate_phantom
from .plan import STRATEGIES, build_plan, coverage_map, fov_for_truncation, \
    sweep_truncation
from .projector import NoiseModel, extract_soa_band, normalize_log, \
    project_local, radon, simulate_counts
from .recon import FILTERS, StitchLayout, fbp, reconstruct_tile, \
    refine_rotation_center, stitch_sinograms, stitch_tiles, synthesize_360
from .register import StudyConfig, angle_downsampling_study, budget_study, \
    perturb_offsets
from .rng import COUNTS_STREAM, stream

OUT_ENV = "TOMOTILE_OUT"

SUBCOMMANDS = ("phantom", "coverage", "sweep", "reconstruct",
               "register-budget", "register-angles", "perturb-demo", "all")


@dataclass
class ExperimentConfig:
    """Resolved experiment recipe; defaults are the desk scale."""

    L: int = 512
    background_lac: float | None = None
    pore_radius_lo: float = 1.0
    pore_radius_hi: float = 25.5
    pore_fraction: float = 0.3
    phantom_seed: int = 0
    strategy: str = "both"
    f: int = 128
    gamma_ps: float = 0.85
    gamma_os: float = 0.85
    n_theta: int = 805
    filter: str = "ramlak"
    n_ph: float | None = None
    seed: int = 0
    truncation_grid: tuple = tuple(round(0.1 + 0.05 * i, 2) for i in range(17))
    recon_truncations: tuple = (0.2, 0.4, 0.6)
    interior_fraction: float = 0.5
    budgets: tuple = (250.0, 1000.0, 4000.0, 16000.0)
    factors: tuple = (1, 2, 4, 8, 16)
    trials: int = 20
    sigma: float = 4.0
    demo_f: int = 84
    demo_seed: int = 3
    refine_center: bool = True
    out: str | None = None

    def validate(self):
        if self.L < 16:
            raise ParameterError("L must be >= 16")
        if not (0 < self.pore_radius_lo <= self.pore_radius_hi < self.L / 2):
            raise ParameterError("pore radius range must satisfy 0 < lo <= hi < L/2")
        if not 0 <= self.pore_fraction <= 0.6:
            raise ParameterError("pore_fraction must be in [0, 0.6]")
        if self.strategy not in STRATEGIES + ("both",):
            raise ParameterError("strategy must be soa, lta, or both")
        if self.f < 2 or self.demo_f < 2:
            raise ParameterError("fields of view must be >= 2 pixels")
        for g in (self.gamma_ps, self.gamma_os):
            if not 0 < g <= 1:
                raise ParameterError("gamma must be in (0, 1]")
        if self.n_theta < 2:
            raise ParameterError("n_theta must be >= 2")
        if self.filter not in FILTERS:
            raise ParameterError("filter must be one of %s" % (FILTERS,))
        if self.n_ph is not None and not self.n_ph > 0:
            raise ParameterError("n_ph must be > 0 or omitted")
        for T in tuple(self.truncation_grid) + tuple(self.recon_truncations):
            if not 0 < T <= 1:
                raise ParameterError("truncation ratios must be in (0, 1]")
        if not 0 < self.interior_fraction < 1:
            raise ParameterError("interior_fraction must be in (0, 1)")
        if any(b <= 0 for b in self.budgets):
            raise ParameterError("budgets must be > 0")
        if any(x < 1 for x in self.factors):
            raise ParameterError("factors must be >= 1")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if self.sigma < 0:
            raise ParameterError("sigma must be >= 0")
        if self.seed < 0 or self.phantom_seed < 0 or self.demo_seed < 0:
            raise ParameterError("seeds must be non-negative")
        return self


_TUPLE_FIELDS = {"truncation_grid", "recon_truncations", "budgets", "factors"}


def load_config(path=None, overrides=None):
    """Defaults, then TOML file values, then explicit overrides."""
    values = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(2, "config file not found", str(p))
        with open(p, "rb") as fh:
            data = tomllib.load(fh)
        known = {f.name for f in fields(ExperimentConfig)}
        for key, val in data.items():
            if key not in known:
                raise ParameterError("unknown config key: %s" % key)
            values[key] = tuple(val) if key in _TUPLE_FIELDS else val
    cfg = replace(ExperimentConfig(), **values)
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg.validate()


def resolve_out(cfg, subcommand):
    base = cfg.out or os.environ.get(OUT_ENV) or "tomotile-out"
    out = Path(base) / subcommand
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out, cfg, subcommand):
    doc = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "config": asdict(cfg),
        "seeds": {"seed": cfg.seed, "phantom_seed": cfg.phantom_seed,
                  "demo_seed": cfg.demo_seed},
    }
    path = Path(out) / "manifest.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return path


def make_phantom(cfg):
    return generate_phantom(
        L=cfg.L,
        background_lac=cfg.background_lac,
        pore_radius_range=(cfg.pore_radius_lo, cfg.pore_radius_hi),
        target_pore_fraction=cfg.pore_fraction,
        seed=cfg.phantom_seed,
    )


def _pgm_range(values):
    lo = float(values.min())
    hi = float(values.max())
    if hi <= lo:
        hi = lo + 1.0
    return lo, hi


def _save_image(out, stem, image):
    values = image.values if hasattr(image, "values") else image
    write_raster(Path(out) / (stem + ".mtr"), image)
    export_pgm(values, Path(out) / (stem + ".pgm"), *_pgm_range(values))


def run_phantom(cfg, out, ph=None):
    ph = ph or make_phantom(cfg)
    _save_image(out, "phantom", ph.grid)
    meta_path = Path(out) / "phantom_meta.json"
    meta_path.write_text(json.dumps(ph.metadata(), sort_keys=True, indent=1) + "\n")
    return {"phantom": ph}


def run_coverage(cfg, out):
    """Per-strategy sinogram coverage counts (sampling footprint)."""
    results = {}
    for strategy in _strategies(cfg):
        gamma = cfg.gamma_ps if strategy == "soa" else cfg.gamma_os
        plan = build_plan(strategy, cfg.L, cfg.f, gamma, cfg.n_theta)
        cov = coverage_map(plan)
        counts = cov.counts.astype(np.float64)
        export_pgm(counts, Path(out) / ("coverage_%s.pgm" % strategy),
                   *_pgm_range(counts))
        results[strategy] = {"A": int(cov.total), "n_scans": plan.n_scans,
                             "shape": list(counts.shape)}
    (Path(out) / "coverage.json").write_text(
        json.dumps(results, sort_keys=True, indent=1) + "\n")
    return results


def run_sweep(cfg, out, ph=None):
    """Data size and dose versus truncation ratio, both strategies."""
    ph = ph or make_phantom(cfg)
    rows = sweep_truncation(("soa", "lta"), cfg.truncation_grid, cfg.L,
                            cfg.gamma_ps, cfg.n_theta, ph.support_mask())
    write_csv(Path(out) / "sweep.csv",
              ["strategy", "T", "f", "n_f_total", "A", "D_relative",
               "D_physical"], rows)
    return rows


def _strategies(cfg):
    return ("soa", "lta") if cfg.strategy == "both" else (cfg.strategy,)


def _noise_seed(cfg, *labels):
    return int(stream(cfg.seed, COUNTS_STREAM, *labels).integers(0, 2**62))


def soa_reconstruct(full360, f, gamma, L, filter="ramlak", n_ph=None,
                    seed_for=None):
    """Bands from the full-turn sinogram, feather-stitched, then FBP.

    Returns (image, stitched sinogram, reassembly error); the error is
    the max abs difference between the stitched sinogram and the source
    columns it should reproduce, meaningful for noiseless input.
    ``seed_for`` maps a scan index to its noise seed.
    """
    plan = build_plan("soa", L, f, gamma, max(2, full360.n_angles // 2))
    bands = [extract_soa_band(full360, p, f) for p in plan.offsets]
    starts = [int(round(full360.c0 - b.c0)) for b in bands]
    if n_ph is not None:
        seed_for = seed_for or (lambda i: i)
        noisy = []
        for i, band in enumerate(bands):
            counts = simulate_counts(band, NoiseModel(n_ph, seed_for(i)))
            noisy.append(normalize_log(counts, n_ph, like=band))
        bands = noisy
    stitched = stitch_sinograms(bands, starts, blend="feather")
    origin = min(starts)
    span = stitched.values.shape[1]
    window = full360.values[:, origin: origin + span]
    reassembly = float(np.abs(stitched.values - window).max())
    image = fbp(stitched, L, filter=filter)
    return image, stitched, reassembly


def lta_reconstruct(grid, support, f, gamma, L, n_theta, filter="ramlak",
                    n_ph=None, seed_for=None, positions=None):
    """Local scans on the plan grid, tile FBP, feathered mosaic.

    Returns (mosaic image, tiles).  ``positions`` overrides the stitch
    placement (perturbation studies); default is the true centers.
    """
    plan = build_plan("lta", L, f, gamma, n_theta)
    angles360 = uniform_angles(2 * n_theta, 2.0 * math.pi)
    seed_for = seed_for or (lambda i: i)
    tiles = []
    for i, center in enumerate(plan.centers):
        local = project_local(grid, center, f, angles360)
        if n_ph is not None:
            counts = simulate_counts(local, NoiseModel(n_ph, seed_for(i)))
            local = normalize_log(counts, n_ph, like=local)
        tiles.append(reconstruct_tile(local, gamma, roi_center=center,
                                      filter=filter))
    if positions is None:
        positions = [t.roi_center for t in tiles]
    layout = StitchLayout(positions=positions, out_shape=(L, L),
                          blend="feather", object_mask=support)
    return stitch_tiles(tiles, layout), tiles


def run_reconstruct(cfg, out, ph=None, full360=None, reference=None):
    """End-to-end SOA/LTA reconstructions with SSIM against full FBP."""
    ph = ph or make_phantom(cfg)
    support = ph.support_mask()
    if full360 is None or reference is None:
        half = radon(ph.grid, uniform_angles(cfg.n_theta, math.pi))
        full360 = synthesize_360(half)
        reference = fbp(half, cfg.L, filter=cfg.filter)
    _save_image(out, "reference", reference)
    rows = []
    for ti, T in enumerate(cfg.recon_truncations):
        tag = ("%g" % T).replace(".", "p")
        if "soa" in _strategies(cfg):
            f = fov_for_truncation(T, cfg.L, cfg.gamma_ps)
            image, _, reassembly = soa_reconstruct(
                full360, f, cfg.gamma_ps, cfg.L, filter=cfg.filter,
                n_ph=cfg.n_ph,
                seed_for=lambda i, ti=ti: _noise_seed(cfg, 0, ti, i))
            _save_image(out, "recon_soa_T%s" % tag, image)
            rows.append({
                "strategy": "soa", "T": T, "f": f,
                "ssim": float(ssim(image, reference, mask=support)),
                "interior_ssim": "",
                "reassembly_error": reassembly,
            })
        if "lta" in _strategies(cfg):
            f = fov_for_truncation(T, cfg.L, cfg.gamma_os)
            image, tiles = lta_reconstruct(
                ph.grid, support, f, cfg.gamma_os, cfg.L, cfg.n_theta,
                filter=cfg.filter, n_ph=cfg.n_ph,
                seed_for=lambda i, ti=ti: _noise_seed(cfg, 1, ti, i))
            _save_image(out, "recon_lta_T%s" % tag, image)
            rows.append({
                "strategy": "lta", "T": T, "f": f,
                "ssim": float(ssim(image, reference, mask=support)),
                "interior_ssim": float(lta_interior_ssim(
                    tiles, reference, cfg.interior_fraction)),
                "reassembly_error": "",
            })
    write_csv(Path(out) / "reconstruct.csv",
              ["strategy", "T", "f", "ssim", "interior_ssim",
               "reassembly_error"], rows)
    return rows


def run_register_budget(cfg, out):
    study = StudyConfig(phantom_seed=cfg.phantom_seed, seed=cfg.seed,
                        trials=cfg.trials, budgets=tuple(cfg.budgets))
    rows = budget_study(study)
    write_csv(Path(out) / "register_budget.csv",
              ["strategy", "axis", "mean_error_px", "std_error_px", "trials"],
              rows)
    return rows


def run_register_angles(cfg, out):
    study = StudyConfig(phantom_seed=cfg.phantom_seed, seed=cfg.seed,
                        trials=cfg.trials, factors=tuple(cfg.factors))
    rows = angle_downsampling_study(study)
    write_csv(Path(out) / "register_angles.csv",
              ["strategy", "axis", "mean_error_px", "std_error_px", "trials"],
              rows)
    return rows


def _roi_slices(L, dx, dy, size):
    c = (L - 1) / 2.0
    half = size // 2
    r0 = int(round(c + dy)) - half
    c0 = int(round(c + dx)) - half
    return slice(r0, r0 + size), slice(c0, c0 + size)


def _roi_rmse(image, truth, support, rows, cols):
    m = support[rows, cols]
    d = (image[rows, cols] - truth[rows, cols])[m]
    return float(np.sqrt(np.mean(d * d)))


def run_perturb_demo(cfg, out, ph=None, full360=None):
    """Accumulated SOA band drift versus independent LTA tile jitter.

    Per-pair Gaussian offset errors (sigma, rounded) accumulate along
    the SOA band chain; the rotation axis is re-optimized on the
    central band before FBP.  The matching LTA mosaic takes independent
    per-tile jitter instead.  Reports per-ROI RMSE ratios against the
    correctly-registered baselines.
    """
    ph = ph or make_phantom(cfg)
    support = ph.support_mask()
    truth = ph.grid.values
    if full360 is None:
        half = radon(ph.grid, uniform_angles(cfg.n_theta, math.pi))
        full360 = synthesize_360(half)
    f = cfg.demo_f
    central = _roi_slices(cfg.L, 0, 0, max(8, cfg.L // 16))
    off_dist = math.ceil(cfg.L / 3) + 5
    off_center = _roi_slices(cfg.L, 0, -off_dist, max(8, cfg.L // 8))
    search = max(5.0, math.ceil(3 * cfg.sigma) + 2)

    # SOA: accumulate per-pair errors along the band chain.
    plan = build_plan("soa", cfg.L, f, cfg.gamma_ps, cfg.n_theta)
    bands = [extract_soa_band(full360, p, f) for p in plan.offsets]
    starts = [int(round(full360.c0 - b.c0)) for b in bands]

    def soa_recon_at(offsets):
        st = stitch_sinograms(bands, offsets, blend="feather")
        c0 = st.c0
        if cfg.refine_center:
            c0 = refine_rotation_center(st, cfg.L, search, step=0.25, crop=48)
        st = Sinogram(values=st.values, angles=st.angles, c0=c0)
        return fbp(st, cfg.L, filter=cfg.filter)

    pairwise = np.diff(starts)
    drifted = perturb_offsets(pairwise, cfg.sigma, cfg.demo_seed)
    perturbed = [starts[0]] + list(starts[0] + np.cumsum(drifted))
    soa_base = soa_recon_at(starts)
    soa_pert = soa_recon_at(perturbed)
    _save_image(out, "soa_baseline", soa_base)
    _save_image(out, "soa_perturbed", soa_pert)

    # LTA: same sigma, independent per tile, no accumulation.
    lta_base, tiles = lta_reconstruct(ph.grid, support, f, cfg.gamma_os,
                                      cfg.L, cfg.n_theta, filter=cfg.filter)
    positions = np.array([t.roi_center for t in tiles])
    jittered = perturb_offsets(positions, cfg.sigma, cfg.demo_seed)
    layout = StitchLayout(positions=[tuple(p) for p in jittered],
                          out_shape=(cfg.L, cfg.L), blend="feather",
                          object_mask=support)
    with warnings.catch_warnings():
        # jittered tiles can leave a thin uncovered rim outside the ROIs
        warnings.simplefilter("ignore")
        lta_pert = stitch_tiles(tiles, layout)
    _save_image(out, "lta_baseline", lta_base)
    _save_image(out, "lta_perturbed", lta_pert)

    def ratios(pert, base):
        return {
            "central": _roi_rmse(pert.values, truth, support, *central)
            / _roi_rmse(base.values, truth, support, *central),
            "off_center": _roi_rmse(pert.values, truth, support, *off_center)
            / _roi_rmse(base.values, truth, support, *off_center),
        }

    result = {
        "sigma": cfg.sigma,
        "demo_seed": cfg.demo_seed,
        "f": f,
        "n_soa_bands": len(bands),
        "n_lta_tiles": len(tiles),
        "off_center_distance_px": off_dist,
        "soa": ratios(soa_pert, soa_base),
        "lta": ratios(lta_pert, lta_base),
    }
    (Path(out) / "perturb_demo.json").write_text(
        json.dumps(result, sort_keys=True, indent=1) + "\n")
    return result


def run_all(cfg, base_out=None):
    """Every subcommand in sequence, sharing the acquisition."""
    results = {}
    ph = make_phantom(cfg)
    half = radon(ph.grid, uniform_angles(cfg.n_theta, math.pi))
    full360 = synthesize_360(half)
    reference = fbp(half, cfg.L, filter=cfg.filter)

    def out_for(name):
        sub = resolve_out(cfg, name) if base_out is None \
            else Path(base_out) / name
        sub.mkdir(parents=True, exist_ok=True)
        write_manifest(sub, cfg, name)
        return sub

    run_phantom(cfg, out_for("phantom"), ph=ph)
    results["coverage"] = run_coverage(cfg, out_for("coverage"))
    results["sweep"] = run_sweep(cfg, out_for("sweep"), ph=ph)
    results["reconstruct"] = run_reconstruct(
        cfg, out_for("reconstruct"), ph=ph, full360=full360,
        reference=reference)
    results["register_budget"] = run_register_budget(
        cfg, out_for("register-budget"))
    results["register_angles"] = run_register_angles(
        cfg, out_for("register-angles"))
    results["perturb_demo"] = run_perturb_demo(
        cfg, out_for("perturb-demo"), ph=ph, full360=full360)
    return results


def _parse_float_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ParameterError("expected a comma-separated list of numbers: %r"
                             % text)


def _parse_int_list(text):
    return tuple(int(x) for x in _parse_float_list(text))


def _add_global_flags(parser, repeated=False):
    # repeated copies on subparsers accept the flags after the
    # subcommand too; SUPPRESS keeps them from clobbering earlier values
    extra = {"default": argparse.SUPPRESS} if repeated else {}
    parser.add_argument("--config", help="TOML config file", **extra)
    parser.add_argument("--seed", type=int, help="master RNG seed", **extra)
    parser.add_argument("--threads", type=int, help="cap kernel threads",
                        **extra)
    parser.add_argument("--out", help="output directory (or $%s)" % OUT_ENV,
                        **extra)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tomotile",
        description="Compare beyond-field-of-view scan strategies on "
                    "seeded phantoms.")
    _add_global_flags(parser)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        _add_global_flags(p, repeated=True)
        if name == "sweep":
            p.add_argument("--truncation-grid", type=_parse_float_list,
                           dest="truncation_grid")
        if name == "reconstruct":
            p.add_argument("--strategy", choices=("soa", "lta", "both"))
            p.add_argument("--noise",
                           help="incident photons per pixel per angle, "
                                "or 'off'")
            p.add_argument("--truncations", type=_parse_float_list,
                           dest="recon_truncations")
        if name in ("register-budget", "all"):
            p.add_argument("--budgets", type=_parse_float_list)
        if name in ("perturb-demo", "all"):
            p.add_argument("--sigma", type=float)
    return parser


_RUNNERS = {
    "phantom": run_phantom,
    "coverage": run_coverage,
    "sweep": run_sweep,
    "reconstruct": run_reconstruct,
    "register-budget": run_register_budget,
    "register-angles": run_register_angles,
    "perturb-demo": run_perturb_demo,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {}
        for key in ("seed", "out", "strategy", "truncation_grid",
                    "recon_truncations", "budgets", "sigma"):
            val = getattr(args, key, None)
            if val is not None:
                overrides[key] = val
        noise = getattr(args, "noise", None)
        if noise is not None:
            overrides["n_ph"] = None if noise == "off" else float(noise)
        cfg = load_config(args.config, overrides)
        if args.threads is not None:
            set_threads(args.threads)
        if args.subcommand == "all":
            run_all(cfg)
        else:
            out = resolve_out(cfg, args.subcommand)
            write_manifest(out, cfg, args.subcommand)
            _RUNNERS[args.subcommand](cfg, out)
    except (ValueError, OSError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, (FileNotFoundError, PermissionError)) and exc.filename:
            record["path"] = exc.filename
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
