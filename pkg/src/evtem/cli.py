"""Command-line surface tying the modules into reproducible experiments.

Subcommands: curves, simulate, reduce, fit-law, multislice, reproduce.
All diagnostics go to stderr; data only to declared output files.  Exit codes:
0 success, 1 domain error, 2 bad arguments.
"""

import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np

from . import lawfit as lawfit_mod
from . import multislice as ms
from . import physics, stackio, svgplot
from .lawfit import DecaySeries, discriminate
from .physics import LambdaConvention, beam_kinematics, model_curve_table
from .reduce import dose_independence_check, extract_profile, fit_exponential, reduce_pipeline
from .synth import DecayKind, DecayModel, ScenePhantom, StackKind, generate_stack

SCHEMA_VERSION = 1

_CONFIG_FIELDS = {
    "schema_version", "accel_voltage", "grid", "hbar_v_truth", "truth_law",
    "sqrt_kappa_truth", "delta_phi", "lambda_convention", "width_px",
    "height_px", "pixel_size", "interface_col", "mu_background", "mu_bulk",
    "mu_interface", "n_frames", "row_range", "max_shift", "ratio_threshold",
    "seed",
}


@dataclass
class ExperimentConfig:
    """Everything that determines a full `reproduce` run, JSON-serializable."""

    schema_version: int = SCHEMA_VERSION
    accel_voltage: float = 300000.0
    grid: list = field(default_factory=lambda: [0.9, 2.5, 5.0, 10.0, 20.0, 40.0])
    hbar_v_truth: float = 106.0  # eV nm, generator truth for the reciprocal law
    truth_law: str = "reciprocal"  # or "sqrt"
    sqrt_kappa_truth: float = 47.4  # eV^0.5 nm, generator truth for the sqrt law
    delta_phi: float = 0.5
    lambda_convention: str = "electron_dispersion"
    width_px: int = 512
    height_px: int = 2048
    pixel_size: float = 0.5
    interface_col: int = 64
    mu_background: float = 0.01
    mu_bulk: float = 1.0
    mu_interface: float = 2.0
    n_frames: int = 100
    row_range: list = field(default_factory=lambda: [524, 1524])
    max_shift: int = 0  # the default phantom injects no drift
    ratio_threshold: float = 5.0
    seed: int = 42

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - _CONFIG_FIELDS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if d.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema_version {d['schema_version']}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def config_hash(self):
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def convention(self):
        return LambdaConvention(self.lambda_convention)

    def truth_length(self, delta_e):
        if self.truth_law == "reciprocal":
            return self.hbar_v_truth / delta_e
        if self.truth_law == "sqrt":
            return self.sqrt_kappa_truth / np.sqrt(delta_e)
        raise ValueError(f"unknown truth_law {self.truth_law!r}")

    def phantom(self, delta_e):
        return ScenePhantom(
            width_px=self.width_px, height_px=self.height_px,
            pixel_size=self.pixel_size, interface_col=self.interface_col,
            mu_background=self.mu_background, mu_bulk=self.mu_bulk,
            mu_interface=self.mu_interface,
            decay_model=DecayModel(DecayKind.EXPONENTIAL, self.truth_length(delta_e)),
            delta_e=delta_e,
        )


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def write_curves_csv(path, curves, config_hash=""):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write("dE_eV,l_s_nm,l_e_nm,l_t_nm,x_i_fit_nm,x_ic_nm,t_heisenberg_s\n")
        for i, de in enumerate(curves.grid):
            fh.write(
                f"{de:.6e},{curves.l_s[i]:.6e},{curves.l_e[i]:.6e},"
                f"{curves.l_t[i]:.6e},{curves.x_i_fit[i]:.6e},"
                f"{curves.x_ic[i]:.6e},{curves.t_heisenberg[i]:.6e}\n")


def write_profile_csv(path, profile, config_hash=""):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write("x_nm,y_counts,sigma\n")
        for x, y, s in zip(profile.x, profile.y, profile.sigma):
            fh.write(f"{x:.6e},{y:.6e},{s:.6e}\n")


def write_fit_json(path, fit, provenance=None):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "i0": fit.i0, "x_i_nm": fit.x_i, "baseline": fit.baseline,
        "sigma_x_i_nm": fit.sigma_x_i, "sigma_i0": fit.sigma_i0,
        "chi2_reduced": fit.chi2_reduced,
        "window_nm": list(fit.window),
    }
    if provenance:
        doc["provenance"] = provenance
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_fig4a(path, series, law, config_hash=""):
    """Measured x_i versus energy loss with the fitted reciprocal curve."""
    if len(series) == 0:
        raise ValueError("empty series: nothing to plot")
    de = series.delta_e
    axes = svgplot.Axes(
        x_range=(0.0, float(de.max()) * 1.1),
        y_range=(0.0, float(series.x_i.max()) * 1.15),
    )
    fig = svgplot.SvgFigure(axes, title="Evanescent decay length vs energy loss")
    if config_hash:
        fig.comment(f"config_hash={config_hash}")
    grid = np.linspace(max(float(de.min()) * 0.8, 1e-3), float(de.max()) * 1.1, 200)
    fig.curve(grid, law["hbar_v"] / grid, color="gray")
    fig.markers(de, series.x_i, yerr=series.sigma)
    fig.text(0.55, 0.8, f"hbar v = {law['hbar_v']:.1f} eV nm")
    fig.axis_labels("energy loss (eV)", "x_i (nm)")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(fig.render())


def emit_fig4b(path, curves, series, config_hash=""):
    """Log-log model-curve comparison versus reciprocal energy loss."""
    if curves.grid.size == 0:
        raise ValueError("empty curve table: nothing to plot")
    inv_e = 1.0 / curves.grid[::-1]
    all_lengths = np.concatenate([curves.l_s, curves.l_e, curves.l_t,
                                  curves.x_i_fit, series.x_i])
    axes = svgplot.Axes(
        x_range=svgplot.decade_range(inv_e),
        y_range=svgplot.decade_range(all_lengths),
        xlog=True, ylog=True,
    )
    fig = svgplot.SvgFigure(axes, title="Decay-length models vs 1/energy loss")
    if config_hash:
        fig.comment(f"config_hash={config_hash}")
    fig.curve(inv_e, curves.l_s[::-1], color="black", label="l_s")
    fig.curve(inv_e, curves.x_ic[::-1], color="blue", dash="6,3", label="x_ic")
    fig.curve(inv_e, curves.l_t[::-1], color="red", dash="2,2", label="l_t")
    fig.curve(inv_e, curves.x_i_fit[::-1], color="green", label="x_i_fit")
    fig.markers(1.0 / series.delta_e, series.x_i, yerr=series.sigma)
    fig.axis_labels("1/energy loss (1/eV)", "length (nm)")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(fig.render())


def stack_seeds(master_seed, energy_index):
    """Deterministic per-energy (scattered, incident) seeds."""
    base = (int(master_seed) * 1000003 + energy_index * 2) & 0x7FFFFFFFFFFFFFFF
    return base, base + 1


def run_energy_point(config, energy_index):
    """Generate and reduce one energy of the synthetic experiment."""
    delta_e = config.grid[energy_index]
    phantom = config.phantom(delta_e)
    s_seed, i_seed = stack_seeds(config.seed, energy_index)
    scattered = generate_stack(phantom, config.n_frames, StackKind.SCATTERED, s_seed)
    incident = generate_stack(phantom, config.n_frames, StackKind.INCIDENT, i_seed)
    fit, profile, shifts = reduce_pipeline(
        scattered, incident, phantom.interface_col,
        row_range=tuple(config.row_range), max_shift=config.max_shift)
    return {
        "delta_e_eV": delta_e,
        "x_i_truth_nm": phantom.decay_model.length_nm,
        "fit": fit,
        "profile": profile,
        "shifts": shifts,
        "seeds": [s_seed, i_seed],
    }


def run_reproduce(config, out_dir, log=lambda msg: None):
    """Full pipeline: synthetic stacks at each energy, reduction, law fit,
    model curves, multi-slice control, plots, and a provenance-stamped report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = config.config_hash()
    beam = beam_kinematics(config.accel_voltage)

    t0 = time.monotonic()
    points = []
    for i, de in enumerate(config.grid):
        point = run_energy_point(config, i)
        points.append(point)
        log(f"dE = {de:g} eV: x_i = {point['fit'].x_i:.4f} "
            f"+/- {point['fit'].sigma_x_i:.4f} nm "
            f"(truth {point['x_i_truth_nm']:.4f})")

    series = DecaySeries(
        delta_e=np.array([p["delta_e_eV"] for p in points]),
        x_i=np.array([p["fit"].x_i for p in points]),
        sigma=np.array([p["fit"].sigma_x_i for p in points]),
        provenance=tuple(f"seed={p['seeds'][0]}" for p in points),
    )
    law = discriminate(series, ratio_threshold=config.ratio_threshold)
    log(f"law fit: hbar v = {law.hbar_v:.2f} +/- {law.sigma_hbar_v:.2f} eV nm, "
        f"v/c = {law.v_over_c:.3f}, preferred = {law.preferred_model.value}")

    curves = model_curve_table(beam, config.grid, delta_phi=config.delta_phi,
                               kappa_fit=config.hbar_v_truth,
                               convention=config.convention())
    control = run_multislice_control(beam, out, chash)
    log(f"multislice control: tail = {control['focus_metrics']['tail_extent_nm']:.3f} nm "
        f"at defocus 0")

    write_curves_csv(out / "curves.csv", curves, chash)
    lawfit_mod.write_series_csv(out / "series.csv", series, f"config_hash={chash}")
    lawfit_mod.write_lawfit_json(out / "lawfit.json", law,
                                 provenance={"config_hash": chash, "seed": config.seed})
    emit_fig4a(out / "fig4a.svg", series, {"hbar_v": law.hbar_v}, chash)
    emit_fig4b(out / "fig4b.svg", curves, series, chash)

    report = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "config_hash": chash,
        "seed": config.seed,
        "beam": {"wavelength_nm": beam.wavelength, "beta": beam.beta,
                 "momentum_c_eV": beam.momentum_c},
        "fits": [
            {
                "delta_e_eV": p["delta_e_eV"],
                "x_i_truth_nm": p["x_i_truth_nm"],
                "x_i_nm": p["fit"].x_i,
                "sigma_x_i_nm": p["fit"].sigma_x_i,
                "i0": p["fit"].i0,
                "baseline": p["fit"].baseline,
                "chi2_reduced": p["fit"].chi2_reduced,
                "window_nm": list(p["fit"].window),
                "shifts": [list(s) for s in p["shifts"]],
                "seeds": p["seeds"],
            }
            for p in points
        ],
        "lawfit": lawfit_mod.lawfit_to_dict(law),
        "curves": {
            "dE_eV": curves.grid.tolist(),
            "l_s_nm": curves.l_s.tolist(),
            "l_e_nm": curves.l_e.tolist(),
            "l_t_nm": curves.l_t.tolist(),
            "x_i_fit_nm": curves.x_i_fit.tolist(),
            "x_ic_nm": curves.x_ic.tolist(),
            "t_heisenberg_s": curves.t_heisenberg.tolist(),
        },
        "multislice_control": control,
    }
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log(f"total runtime {time.monotonic() - t0:.1f} s; outputs in {out}")
    return report


# multi-slice control geometry: a coarse grid matching the synthetic phantom
# pixel size for the tail check, a fine grid for the defocus fringe scan;
# thin slab so the lateral phase gradient stays inside the band limit
TAIL_CONTROL = {"nx": 1024, "ny": 16, "pixel_size": 0.5, "edge_col": 384,
                "sample_start_col": 128, "thickness": 20.0, "n_slices": 16,
                "inner_potential": 15.0}
SCAN_CONTROL = {"nx": 4096, "ny": 8, "pixel_size": 0.1, "edge_col": 1024,
                "sample_start_col": 256, "thickness": 20.0, "n_slices": 16,
                "inner_potential": 15.0}
SCAN_DEFOCI = [-200.0, -150.0, -100.0, -50.0, 0.0, 50.0, 100.0, 150.0, 200.0]


def _control_slab(beam, geom):
    return ms.SlabPhantom(
        inner_potential=geom["inner_potential"], thickness=geom["thickness"],
        n_slices=geom["n_slices"], edge_col=geom["edge_col"],
        interaction_constant=ms.interaction_constant(beam),
        sample_start_col=geom["sample_start_col"])


def run_multislice_control(beam, out_dir=None, config_hash=""):
    """Elastic-slab control: zero-defocus tail metrics plus a defocus scan."""
    g = TAIL_CONTROL
    incident = ms.plane_wave(g["nx"], g["ny"], g["pixel_size"], beam.wavelength)
    exit_wave = ms.multislice_exit_wave(incident, _control_slab(beam, g))
    image = ms.apply_defocus(exit_wave, 0.0)
    focus_metrics = ms.edge_metrics(image, g["edge_col"], g["pixel_size"])

    s = SCAN_CONTROL
    incident_fine = ms.plane_wave(s["nx"], s["ny"], s["pixel_size"], beam.wavelength)
    scan = ms.defocus_scan(incident_fine, _control_slab(beam, s), SCAN_DEFOCI)

    if out_dir is not None:
        out = Path(out_dir)
        stackio.write_sim_image(out / "control_focus.evls", image, g["pixel_size"])
        with open(out / "defocus_scan.csv", "w", encoding="utf-8", newline="") as fh:
            if config_hash:
                fh.write(f"# config_hash={config_hash}\n")
            fh.write("defocus_nm,fringe_amplitude,tail_extent_nm\n")
            for row in scan:
                fh.write(f"{row['defocus_nm']:.6e},{row['fringe_amplitude']:.6e},"
                         f"{row['tail_extent_nm']:.6e}\n")
    return {"focus_metrics": focus_metrics, "defocus_scan": scan}


def _fail(message):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _parse_grid(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"cannot parse energy grid {text!r}")


@click.group()
def main():
    """Evanescent-field delocalization toolkit."""


@main.command()
@click.option("--voltage", type=float, default=300000.0, show_default=True)
@click.option("--grid", default="0.9,2.5,5,10,20,40", show_default=True,
              help="Comma-separated energy losses in eV.")
@click.option("--delta-phi", type=float, default=0.5, show_default=True)
@click.option("--kappa", type=float, default=106.0, show_default=True,
              help="Fitted hbar*v in eV nm for the x_i_fit column.")
@click.option("--convention", type=click.Choice([c.value for c in LambdaConvention]),
              default=LambdaConvention.ELECTRON_DISPERSION.value, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output directory.")
def curves(voltage, grid, delta_phi, kappa, convention, out):
    """Tabulate all model curves into curves.csv."""
    try:
        beam = beam_kinematics(voltage)
        table = model_curve_table(beam, sorted(_parse_grid(grid)), delta_phi,
                                  kappa, LambdaConvention(convention))
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_curves_csv(out / "curves.csv", table)
    except ValueError as exc:
        _fail(exc)
    click.echo(f"wrote {out / 'curves.csv'}", err=True)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True,
              help="Phantom JSON document.")
@click.option("--frames", type=int, default=100, show_default=True)
@click.option("--kind", type=click.Choice(["incident", "scattered"]),
              default="scattered", show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), required=True, help="Output stack file.")
def simulate(config_path, frames, kind, seed, out):
    """Generate a synthetic Poisson counting stack."""
    try:
        phantom = stackio.load_phantom(config_path)
        stack = generate_stack(phantom, frames, StackKind[kind.upper()], seed)
        stackio.write_stack(out, stack)
    except (ValueError, KeyError) as exc:
        _fail(exc)
    click.echo(f"wrote {out}", err=True)


@main.command(name="reduce")
@click.option("--scattered", type=click.Path(exists=True), required=True)
@click.option("--incident", type=click.Path(exists=True), required=True)
@click.option("--interface-col", type=int, required=True)
@click.option("--rows", default=None, help="Row range r0:r1 (default: all rows).")
@click.option("--max-shift", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output directory.")
def reduce_cmd(scattered, incident, interface_col, rows, max_shift, out):
    """Reduce a scattered/incident stack pair to profile.csv and fit.json."""
    try:
        s = stackio.read_stack(scattered)
        i = stackio.read_stack(incident)
        row_range = None
        if rows:
            r0, r1 = rows.split(":")
            row_range = (int(r0), int(r1))
        fit, profile, _ = reduce_pipeline(s, i, interface_col,
                                          row_range=row_range, max_shift=max_shift)
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_profile_csv(out / "profile.csv", profile)
        write_fit_json(out / "fit.json", fit, provenance={
            "scattered": str(scattered), "incident": str(incident),
            "command": " ".join(sys.argv),
        })
    except ValueError as exc:
        _fail(exc)
    click.echo(f"x_i = {fit.x_i:.4f} +/- {fit.sigma_x_i:.4f} nm", err=True)


@main.command(name="fit-law")
@click.option("--series", "series_path", type=click.Path(exists=True), required=True,
              help="CSV with columns dE_eV,xi_nm,sigma_nm.")
@click.option("--ratio-threshold", type=float, default=5.0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output directory.")
def fit_law(series_path, ratio_threshold, out):
    """Fit the energy law on a measured series; writes lawfit.json."""
    try:
        series = lawfit_mod.read_series_csv(series_path)
        result = discriminate(series, ratio_threshold=ratio_threshold)
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        lawfit_mod.write_lawfit_json(out / "lawfit.json", result,
                                     provenance={"series": str(series_path)})
    except (ValueError, KeyError) as exc:
        _fail(exc)
    click.echo(f"hbar v = {result.hbar_v:.2f} eV nm, "
               f"preferred = {result.preferred_model.value}", err=True)


@main.command(name="multislice")
@click.option("--voltage", type=float, default=300000.0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output directory.")
def multislice_cmd(voltage, out):
    """Run the elastic-slab control and defocus scan."""
    try:
        beam = beam_kinematics(voltage)
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        control = run_multislice_control(beam, out)
        with open(out / "control_metrics.json", "w", encoding="utf-8") as fh:
            json.dump({"schema_version": SCHEMA_VERSION, **control}, fh,
                      indent=2, sort_keys=True)
            fh.write("\n")
    except ValueError as exc:
        _fail(exc)
    click.echo(f"tail extent at focus: "
               f"{control['focus_metrics']['tail_extent_nm']:.3f} nm", err=True)


@main.command()
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Experiment config JSON (default: built-in desk-scale config).")
@click.option("--out", type=click.Path(), required=True, help="Output directory.")
def reproduce(seed, config_path, out):
    """End-to-end synthetic reproduction of the energy-dependence measurement."""
    try:
        config = load_config(config_path) if config_path else ExperimentConfig()
        if seed is not None:
            config.seed = seed
        run_reproduce(config, out, log=lambda msg: click.echo(msg, err=True))
    except ValueError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
