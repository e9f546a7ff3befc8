"""Command-line interface for batch inspection, evaluation and planning.

Parameter precedence is CLI flag > config file > built-in default, and
every run echoes its effective parameters both to stdout and to a
machine-readable run_config.csv next to its outputs. Exit codes:
0 success, 1 partial failure, 2 invalid invocation.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor

import click
import numpy as np

from . import __version__
from . import report as rpt
from .evaluation import confusion, grid_search, metrics
from .hough import HoughConfig, hough_circles, hough_lines
from .image import binarize, load_gray, load_mask, otsu_threshold, save_gray, save_mask
from .optics import OpticsSpec, spec_report
from .pipeline import PipelineConfig, detect
from .rpca import SolverConfig, solve
from .scanning import plan_s_path, stitch
from .segmentation import auto_thresholds, double_threshold
from .spectral import FusionWeights, fuse, lowpass_stack
from .synth import MeshSpec, load_dataset, make_dataset, write_dataset
from .weights import build_weight

# Every key a config file may contain, with its parser. "lambda" is an
# accepted alias for "lam".
_CONFIG_CASTS = {
    "mesh_type": str,
    "lam": float,
    "lambda": float,
    "beta": float,
    "rho": float,
    "lowrank_mode": str,
    "p": float,
    "tau": int,
    "maxstep": int,
    "epsilon": float,
    "w_min": float,
    "graded": lambda s: s.lower() in ("1", "true", "yes"),
    "blur_radius": int,
    "seg_k": float,
    "t1": float,
    "t2": float,
    "k1": float,
    "k2": float,
    "k3": float,
    "sides": str,
    "rho_resolution": float,
    "theta_resolution_deg": float,
    "vote_threshold": int,
    "radius_min": int,
    "radius_max": int,
    "dilate_radius": int,
    "gamma": float,
    "workers": int,
    "period": int,
}


def _read_config_file(path: str) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise click.UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in _CONFIG_CASTS:
                raise click.UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                values[key] = _CONFIG_CASTS[key](val)
            except ValueError as exc:
                raise click.UsageError(f"{path}:{lineno}: bad value for {key}: {exc}")
    if "lambda" in values:
        values.setdefault("lam", values.pop("lambda"))
    return values


class _Params:
    """Flag > config file > default resolution, tracking effective values."""

    def __init__(self, config_path: str | None, flags: dict):
        self.file_values = _read_config_file(config_path) if config_path else {}
        self.flags = flags
        self.effective: dict = {}

    def get(self, key: str, default):
        value = self.flags.get(key)
        if value is None:
            value = self.file_values.get(key, default)
        self.effective[key] = value
        return value


def _parse_sides(text: str) -> tuple[int, int, int]:
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise click.UsageError(f"bad filter sides {text!r}, expected e.g. '10,20,40'")
    if len(parts) != 3:
        raise click.UsageError("sides needs exactly three comma-separated integers")
    return parts


def _build_pipeline_config(params: _Params) -> PipelineConfig:
    mesh_type = params.get("mesh_type", "square")
    base = SolverConfig.for_mesh(mesh_type)
    solver = SolverConfig(
        lam=params.get("lam", base.lam),
        beta=params.get("beta", base.beta),
        rho=params.get("rho", base.rho),
        lowrank_mode=params.get("lowrank_mode", base.lowrank_mode),
        p=params.get("p", base.p),
        tau=params.get("tau", base.tau),
        maxstep=params.get("maxstep", base.maxstep),
        epsilon=params.get("epsilon", base.epsilon),
    )
    radius_min = params.get("radius_min", None)
    radius_max = params.get("radius_max", None)
    period = params.get("period", None)
    if radius_min is None and radius_max is None and period is not None:
        ring = period / 2.0 - 2.0
        radius_min, radius_max = max(2, int(ring) - 2), int(math.ceil(ring)) + 2
    radius_range = None
    if radius_min is not None or radius_max is not None:
        if radius_min is None or radius_max is None:
            raise click.UsageError("set both radius_min and radius_max or neither")
        radius_range = (radius_min, radius_max)
    hough = HoughConfig(
        rho_resolution=params.get("rho_resolution", 1.0),
        theta_resolution=math.radians(params.get("theta_resolution_deg", 1.0)),
        vote_threshold=params.get("vote_threshold", None),
        radius_range=radius_range,
        dilate_radius=params.get("dilate_radius", 2),
    )
    fusion = FusionWeights(
        k1=params.get("k1", 0.8), k2=params.get("k2", 0.2), k3=params.get("k3", 0.3)
    )
    t1 = params.get("t1", None)
    t2 = params.get("t2", None)
    if (t1 is None) != (t2 is None):
        raise click.UsageError("set both t1 and t2 or neither")
    return PipelineConfig(
        mesh_type=mesh_type,
        solver=solver,
        hough=hough,
        fusion=fusion,
        sides=_parse_sides(params.get("sides", "10,20,40")),
        w_min=params.get("w_min", 0.1),
        graded=params.get("graded", False),
        blur_radius=params.get("blur_radius", 2),
        seg_k=params.get("seg_k", 3.0),
        t1=t1,
        t2=t2,
    )


def _echo_effective(params: _Params, out_dir: str | None) -> None:
    rows = sorted((k, v) for k, v in params.effective.items())
    for key, value in rows:
        click.echo(f"config {key} = {value}")
    if out_dir:
        rpt.write_csv(os.path.join(out_dir, "run_config.csv"),
                      ("key", "value"), rows)


def _pipeline_flags(f):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True),
                     default=None, help="Flat key = value config file."),
        click.option("--mesh-type", type=click.Choice(["square", "circular"]),
                     default=None),
        click.option("--lam", "--lambda", "lam", type=float, default=None,
                     help="Sparse-term weight."),
        click.option("--beta", type=float, default=None, help="Noise-term weight."),
        click.option("--rho", type=float, default=None, help="Quadratic penalty."),
        click.option("--lowrank-mode",
                     type=click.Choice(["nuclear", "schatten_p_truncated"]),
                     default=None),
        click.option("--p", type=float, default=None, help="Schatten exponent."),
        click.option("--tau", type=int, default=None, help="Unshrunk rank."),
        click.option("--maxstep", type=int, default=None),
        click.option("--epsilon", type=float, default=None),
        click.option("--w-min", type=float, default=None,
                     help="Weight at prior pixels."),
        click.option("--graded/--two-level", "graded", default=None,
                     help="Blurred weight map instead of two-level."),
        click.option("--blur-radius", type=int, default=None),
        click.option("--seg-k", type=float, default=None,
                     help="k of the k-sigma segmentation thresholds."),
        click.option("--t1", type=float, default=None,
                     help="Manual lower threshold (with --t2)."),
        click.option("--t2", type=float, default=None,
                     help="Manual upper threshold (with --t1)."),
        click.option("--k1", type=float, default=None, help="Fusion weight k1."),
        click.option("--k2", type=float, default=None, help="Fusion weight k2."),
        click.option("--k3", type=float, default=None, help="Fusion weight k3."),
        click.option("--sides", type=str, default=None,
                     help="Low-pass filter sides, e.g. '10,20,40'."),
        click.option("--rho-resolution", type=float, default=None),
        click.option("--theta-resolution-deg", type=float, default=None),
        click.option("--vote-threshold", type=int, default=None),
        click.option("--radius-min", type=int, default=None),
        click.option("--radius-max", type=int, default=None),
        click.option("--dilate-radius", type=int, default=None),
        click.option("--period", type=int, default=None,
                     help="Mesh period hint; sets the circle radius search."),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _collect_params(kwargs) -> _Params:
    config_path = kwargs.pop("config_path", None)
    return _Params(config_path, {k: v for k, v in kwargs.items() if v is not None})


def _config_for_item(params: _Params, meta: dict) -> PipelineConfig:
    """Pipeline config for one dataset item; flags and config files win
    over geometry derived from the item's manifest metadata."""
    from .pipeline import matched_sides

    item_params = _Params(None, dict(params.flags))
    item_params.file_values = dict(params.file_values)
    item_params.file_values.setdefault("mesh_type", meta["mesh_type"])
    item_params.file_values.setdefault("period", meta["period"])
    sides = matched_sides(meta["image_size"], meta["period"])
    item_params.file_values.setdefault("sides", ",".join(str(s) for s in sides))
    cfg = _build_pipeline_config(item_params)
    for key, value in item_params.effective.items():
        params.effective.setdefault(key, value)
    return cfg


@click.group()
@click.version_option(version=__version__, prog_name="meshinspect")
def main():
    """Defect inspection for periodic metallic-mesh images."""


def _detect_one(args):
    path, cfg, out_dir, figures = args
    stem = os.path.splitext(os.path.basename(path))[0]
    img = load_gray(path)
    result = detect(img, cfg)
    seg = result.segmentation
    dec = result.decomposition
    save_mask(seg.defect_mask, os.path.join(out_dir, f"{stem}_defect.png"))
    save_mask(seg.broken_mask, os.path.join(out_dir, f"{stem}_broken.png"))
    save_mask(seg.block_mask, os.path.join(out_dir, f"{stem}_block.png"))
    if figures:
        rpt.detection_figure(img, result, os.path.join(out_dir, f"{stem}_overview.png"))
    return (path, "ok", "", dec.iterations, dec.termination, dec.trace[-1][0],
            seg.t1, seg.t2, int(seg.defect_mask.sum()),
            int(seg.broken_mask.sum()), int(seg.block_mask.sum()))


@main.command("detect")
@click.argument("images", nargs=-1, required=True,
                type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--workers", type=int, default=None)
@click.option("--figures/--no-figures", default=True)
@_pipeline_flags
@click.pass_context
def detect_cmd(ctx, images, out_dir, workers, figures, **kwargs):
    """Detect defects in images; writes masks, a report and figures."""
    params = _collect_params(kwargs)
    cfg = _build_pipeline_config(params)
    n_workers = workers if workers is not None else params.get("workers", 1)
    os.makedirs(out_dir, exist_ok=True)
    _echo_effective(params, out_dir)

    jobs = [(path, cfg, out_dir, figures) for path in images]
    rows = []
    failed = 0
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_detect_one, job) for job in jobs]
            for path, fut in zip(images, futures):
                try:
                    rows.append(fut.result())
                except Exception as exc:
                    failed += 1
                    rows.append((path, "error", str(exc)) + ("",) * 8)
    else:
        for job in jobs:
            try:
                rows.append(_detect_one(job))
            except Exception as exc:
                failed += 1
                rows.append((job[0], "error", str(exc)) + ("",) * 8)
    rpt.write_csv(
        os.path.join(out_dir, "report.csv"),
        ("image", "status", "error", "iterations", "termination",
         "final_residual", "t1", "t2", "defect_px", "broken_px", "block_px"),
        rows,
    )
    for row in rows:
        click.echo(f"{row[0]}: {row[1]}" + (f" ({row[2]})" if row[1] != "ok" else ""))
    if failed:
        click.echo(f"{failed}/{len(images)} images failed", err=True)
        ctx.exit(1)


@main.command("prior")
@click.argument("image_path", type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--figures/--no-figures", default=True)
@_pipeline_flags
def prior_cmd(image_path, out_dir, figures, **kwargs):
    """Write the prior masks, weight map and intermediate filter outputs."""
    from .image import normalize
    from .pipeline import compute_priors

    params = _collect_params(kwargs)
    cfg = _build_pipeline_config(params)
    os.makedirs(out_dir, exist_ok=True)
    _echo_effective(params, out_dir)
    img = load_gray(image_path)

    recons = lowpass_stack(img, cfg.sides)
    fused = fuse(*recons, cfg.fusion)
    for i, recon in enumerate(recons, start=1):
        save_gray(normalize(recon), os.path.join(out_dir, f"lowpass_{i}.png"))
    save_gray(normalize(fused), os.path.join(out_dir, "fusion_map.png"))

    block, broken = compute_priors(img, cfg)
    save_mask(block, os.path.join(out_dir, "block_prior.png"))
    save_mask(broken, os.path.join(out_dir, "broken_prior.png"))
    save_gray(build_weight(block, broken, cfg.w_min),
              os.path.join(out_dir, "weights.png"))

    observed = binarize(img, otsu_threshold(img), "above")
    lines_txt = []
    if cfg.mesh_type == "square":
        for ln in hough_lines(observed, cfg.hough):
            lines_txt.append(f"line rho={ln.rho:.2f} theta={ln.theta:.5f} votes={ln.votes}")
    else:
        for c in hough_circles(observed, cfg.hough):
            lines_txt.append(f"circle cx={c.cx} cy={c.cy} r={c.r} votes={c.votes}")
    with open(os.path.join(out_dir, "primitives.txt"), "w") as fh:
        fh.write("\n".join(lines_txt) + ("\n" if lines_txt else ""))
    click.echo(f"priors written to {out_dir} ({len(lines_txt)} primitives)")


@main.command("decompose")
@click.argument("image_path", type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--uniform-weights", is_flag=True, default=False,
              help="Skip the priors and use W = 1 everywhere.")
@click.option("--figures/--no-figures", default=True)
@_pipeline_flags
def decompose_cmd(image_path, out_dir, uniform_weights, figures, **kwargs):
    """Run the decomposition and dump L, E, N plus the iteration trace."""
    from .image import normalize
    from .pipeline import compute_weights

    params = _collect_params(kwargs)
    cfg = _build_pipeline_config(params)
    os.makedirs(out_dir, exist_ok=True)
    _echo_effective(params, out_dir)
    img = load_gray(image_path)
    W = np.ones_like(img) if uniform_weights else compute_weights(img, cfg)
    dec = solve(img, W, cfg.solver)
    save_gray(np.clip(dec.L, 0, 1), os.path.join(out_dir, "background.png"))
    np.save(os.path.join(out_dir, "defect_matrix.npy"), dec.E)
    np.save(os.path.join(out_dir, "noise_matrix.npy"), dec.N)
    save_gray(normalize(dec.E), os.path.join(out_dir, "defect_matrix_preview.png"))
    rpt.write_csv(os.path.join(out_dir, "trace.csv"),
                  ("iteration", "residual", "objective"),
                  [(i + 1, r, o) for i, (r, o) in enumerate(dec.trace)])
    if figures:
        rpt.trace_figure(dec, os.path.join(out_dir, "trace.png"))
    click.echo(f"{dec.termination} after {dec.iterations} iterations, "
               f"residual {dec.trace[-1][0]:.3g}")


@main.command("segment")
@click.argument("matrix_path", type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@_pipeline_flags
def segment_cmd(matrix_path, out_dir, **kwargs):
    """Threshold a saved defect matrix (.npy) into masks."""
    params = _collect_params(kwargs)
    cfg = _build_pipeline_config(params)
    os.makedirs(out_dir, exist_ok=True)
    _echo_effective(params, out_dir)
    E = np.load(matrix_path)
    if cfg.t1 is not None:
        t1, t2 = cfg.t1, cfg.t2
    else:
        t1, t2 = auto_thresholds(E, cfg.seg_k)
    seg = double_threshold(E, t1, t2)
    save_mask(seg.defect_mask, os.path.join(out_dir, "defect.png"))
    save_mask(seg.broken_mask, os.path.join(out_dir, "broken.png"))
    save_mask(seg.block_mask, os.path.join(out_dir, "block.png"))
    click.echo(f"t1={t1:.6g} t2={t2:.6g} defect_px={int(seg.defect_mask.sum())}")


def _eval_one(args):
    item, cfg = args
    result = detect(item.image, cfg)
    seg = result.segmentation
    return seg.defect_mask, seg.broken_mask, seg.block_mask


@main.command("eval")
@click.argument("dataset_dir", type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--pred-dir", type=click.Path(exists=True), default=None,
              help="Score existing defect masks instead of running detection.")
@click.option("--workers", type=int, default=None)
@click.option("--gamma", type=float, default=None)
@click.option("--figures/--no-figures", default=True)
@_pipeline_flags
@click.pass_context
def eval_cmd(ctx, dataset_dir, out_dir, pred_dir, workers, gamma, figures, **kwargs):
    """Score the pipeline against a dataset's ground truth."""
    params = _collect_params(kwargs)
    n_workers = workers if workers is not None else params.get("workers", 1)
    gamma_v = gamma if gamma is not None else params.get("gamma", 1.0)
    os.makedirs(out_dir, exist_ok=True)
    items = load_dataset(dataset_dir)
    rows, scatter, f_values = [], [], []
    failed = 0
    per_kind: dict[str, list[float]] = {}

    configs = []
    for item in items:
        configs.append(_config_for_item(params, item.metadata))
    _echo_effective(params, out_dir)

    if pred_dir is not None:
        preds = []
        for item in items:
            name = f"img_{item.metadata['index']:03d}.png"
            preds.append((load_mask(os.path.join(pred_dir, name)), None, None))
    elif n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            preds = list(pool.map(_eval_one, zip(items, configs)))
    else:
        preds = [_eval_one(job) for job in zip(items, configs)]

    for item, (pred_defect, pred_broken, pred_block) in zip(items, preds):
        meta = item.metadata
        gt_union = item.gt_broken | item.gt_block
        targets = [("defect", pred_defect, gt_union)]
        if pred_broken is not None:
            targets.append(("broken", pred_broken, item.gt_broken))
            targets.append(("block", pred_block, item.gt_block))
        for target, pred, gt in targets:
            if target != "defect" and not gt.any():
                continue  # class absent from this image
            c = confusion(pred, gt)
            rep = metrics(c, gamma_v)
            rows.append((meta["index"], meta["kind"], target, c.tp, c.fp, c.tn,
                         c.fn, rep.tpr, rep.fpr, rep.ppv, rep.npv, rep.f))
            if target == "defect":
                scatter.append((meta["index"], rep))
                f_values.append(rep.f)
                per_kind.setdefault(meta["kind"], []).append(
                    rep.f if rep.f is not None else 0.0)
                if rep.f is None:
                    failed += 1

    summary = [(kind, len(vals), float(np.mean(vals)))
               for kind, vals in sorted(per_kind.items())]
    all_f = [v for vals in per_kind.values() for v in vals]
    summary.append(("all", len(all_f), float(np.mean(all_f)) if all_f else None))
    rpt.write_csv(os.path.join(out_dir, "metrics.csv"),
                  ("index", "kind", "target", "tp", "fp", "tn", "fn",
                   "tpr", "fpr", "ppv", "npv", "f"), rows)
    rpt.write_csv(os.path.join(out_dir, "summary.csv"),
                  ("kind", "images", "mean_f"), summary)
    if figures:
        rpt.metrics_scatter_figure(scatter, os.path.join(out_dir, "tpr_fpr.png"))
        rpt.f_histogram_figure(f_values, os.path.join(out_dir, "f_hist.png"))
    for kind, count, mean_f in summary:
        shown = "absent" if mean_f is None else f"{mean_f:.4f}"
        click.echo(f"{kind}: n={count} mean_f={shown}")
    if failed:
        ctx.exit(1)


@main.command("grid-search")
@click.argument("dataset_dir", type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--lam-grid", default="0.05,0.08,0.11,0.14,0.17,0.2",
              help="Comma-separated sparse weights.")
@click.option("--beta-grid", default="0.001,0.002,0.003,0.004,0.005",
              help="Comma-separated noise weights.")
@click.option("--workers", type=int, default=None)
@click.option("--figures/--no-figures", default=True)
@_pipeline_flags
def grid_cmd(dataset_dir, out_dir, lam_grid, beta_grid, workers, figures, **kwargs):
    """Scan (lam, beta) cells over a dataset and report the best pair."""
    params = _collect_params(kwargs)
    n_workers = workers if workers is not None else params.get("workers", 1)
    os.makedirs(out_dir, exist_ok=True)
    items = load_dataset(dataset_dir)
    cfg = _config_for_item(params, items[0].metadata)
    _echo_effective(params, out_dir)
    dataset = [(item.image, item.gt_broken | item.gt_block,
                item.metadata["mesh_type"]) for item in items]
    lams = [float(v) for v in lam_grid.split(",")]
    betas = [float(v) for v in beta_grid.split(",")]
    result = grid_search(dataset, lams, betas, cfg_base=cfg.solver,
                         pipeline_cfg=cfg, seg_k=cfg.seg_k, workers=n_workers)
    image_rows = []
    for c in result.cells:
        for idx, f in enumerate(c.per_image_f):
            image_rows.append((idx, c.lam, c.beta, f))
    rpt.write_csv(os.path.join(out_dir, "grid.csv"),
                  ("image", "lam", "beta", "f"), image_rows)
    rpt.write_csv(os.path.join(out_dir, "grid_summary.csv"),
                  ("lam", "beta", "mean_f", "error"),
                  [(c.lam, c.beta, c.mean_f, c.error) for c in result.cells])
    if figures:
        rpt.grid_heatmap_figure(result, os.path.join(out_dir, "grid.png"))
    click.echo(f"best lam={result.best_lam:g} beta={result.best_beta:g} "
               f"mean_f={result.best_score:.4f}")


@main.command("synth")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--n", type=int, default=60, show_default=True)
@click.option("--mesh-type", type=click.Choice(["square", "circular"]),
              default="square", show_default=True)
@click.option("--period", type=int, default=None,
              help="Defaults to 8 for square, 16 for circular.")
@click.option("--line-width", type=int, default=2, show_default=True)
@click.option("--image-size", type=int, default=256, show_default=True)
@click.option("--line-intensity", type=float, default=0.75, show_default=True)
@click.option("--background-intensity", type=float, default=0.15, show_default=True)
@click.option("--illumination-gradient", type=float, default=0.06, show_default=True)
@click.option("--noise-sigma", type=float, default=0.008, show_default=True)
@click.option("--mix", default="1/3,1/3,1/3", show_default=True,
              help="Broken,block,mixed proportions.")
@click.option("--seed", type=int, default=0, show_default=True)
def synth_cmd(out_dir, n, mesh_type, period, line_width, image_size,
              line_intensity, background_intensity, illumination_gradient,
              noise_sigma, mix, seed):
    """Generate a synthetic defect dataset with ground truth."""
    if period is None:
        period = 8 if mesh_type == "square" else 16
    try:
        proportions = tuple(eval(part, {"__builtins__": {}})  # allows '1/3'
                            for part in mix.split(","))
        proportions = tuple(float(p) for p in proportions)
    except Exception:
        raise click.UsageError(f"bad mix {mix!r}; expected three proportions")
    if len(proportions) != 3 or abs(sum(proportions) - 1.0) > 1e-9:
        raise click.UsageError(f"bad mix {mix!r}; three proportions must sum to 1")
    try:
        mesh = MeshSpec(mesh_type=mesh_type, period=period, line_width=line_width,
                        image_size=image_size, line_intensity=line_intensity,
                        background_intensity=background_intensity,
                        illumination_gradient=illumination_gradient,
                        noise_sigma=noise_sigma, seed=seed)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    items = make_dataset(n=n, mesh=mesh, mix=proportions, seed=seed)
    write_dataset(items, out_dir)
    click.echo(f"wrote {len(items)} images to {out_dir}")


@main.command("scan-plan")
@click.option("--width", type=float, required=True, help="Region width in um.")
@click.option("--height", type=float, required=True, help="Region height in um.")
@click.option("--step", type=float, default=500.0, show_default=True)
@click.option("--fov", type=float, default=800.0, show_default=True,
              help="Field-of-view diameter in um.")
@click.option("--dwell", type=float, default=2.0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--figures/--no-figures", default=True)
def scan_plan_cmd(width, height, step, fov, dwell, out_dir, figures):
    """Plan a serpentine scan over a rectangular region."""
    try:
        plan = plan_s_path((width, height), step, fov, dwell)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    os.makedirs(out_dir, exist_ok=True)
    rpt.write_csv(os.path.join(out_dir, "plan.csv"),
                  ("index", "x_um", "y_um", "dwell_s"),
                  [(i, x, y, plan.dwell) for i, (x, y) in enumerate(plan.nodes)])
    if figures:
        rpt.plan_figure(plan, os.path.join(out_dir, "plan.png"))
    click.echo(f"nodes={len(plan.nodes)} overlap={plan.overlap:g}um "
               f"total_dwell={plan.total_dwell:g}s")


@main.command("stitch")
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--tiles-dir", required=True, type=click.Path(exists=True))
@click.option("--pitch", type=float, required=True, help="um per pixel.")
@click.option("--fov", type=float, default=800.0, show_default=True)
@click.option("--step", type=float, default=None,
              help="Defaults to the smallest node spacing in the plan.")
@click.option("--dwell", type=float, default=2.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def stitch_cmd(plan_path, tiles_dir, pitch, fov, step, dwell, out_path):
    """Blend tiles named tile_<index>.png back into a mosaic."""
    import csv as _csv

    with open(plan_path, newline="") as fh:
        nodes = [(float(row["x_um"]), float(row["y_um"]))
                 for row in _csv.DictReader(fh)]
    if not nodes:
        raise click.UsageError(f"empty plan {plan_path!r}")
    if step is None:
        gaps = {abs(b[0] - a[0]) + abs(b[1] - a[1]) for a, b in zip(nodes, nodes[1:])}
        gaps.discard(0.0)
        step = min(gaps) if gaps else fov / 2
    xs = sorted({n[0] for n in nodes})
    ys = sorted({n[1] for n in nodes})
    region = (max(xs) if len(xs) > 1 else xs[0] + 1.0,
              max(ys) if len(ys) > 1 else ys[0] + 1.0)
    from .scanning import ScanPlan
    plan = ScanPlan(nodes=tuple(nodes), step=step, dwell=dwell,
                    fov_diameter=fov, region=region)
    tiles = []
    for i, node in enumerate(nodes):
        tile_path = os.path.join(tiles_dir, f"tile_{i:03d}.png")
        if not os.path.isfile(tile_path):
            raise click.UsageError(f"missing tile {tile_path!r}")
        tiles.append((load_gray(tile_path), node))
    mosaic = stitch(tiles, plan, pitch)
    save_gray(mosaic, out_path)
    click.echo(f"mosaic {mosaic.shape[1]}x{mosaic.shape[0]} written to {out_path}")


@main.command("optics")
@click.option("--f-objective", type=float, default=30.0, show_default=True)
@click.option("--f-tube", type=float, default=40.0, show_default=True)
@click.option("--f-internal", type=float, default=5.43, show_default=True)
@click.option("--f-relay", type=float, default=2.87, show_default=True)
@click.option("--pixel-size", type=float, default=0.8, show_default=True)
@click.option("--screen-to-sensor-ratio", type=float, default=18.0, show_default=True)
@click.option("--fov-diameter", type=float, default=800.0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def optics_cmd(f_objective, f_tube, f_internal, f_relay, pixel_size,
               screen_to_sensor_ratio, fov_diameter, out_path):
    """Print the imaging-system magnification and sampling report."""
    spec = OpticsSpec(f_objective=f_objective, f_tube=f_tube,
                      f_internal=f_internal, f_relay=f_relay,
                      pixel_size=pixel_size,
                      screen_to_sensor_ratio=screen_to_sensor_ratio,
                      fov_diameter_um=fov_diameter)
    data = spec_report(spec)
    click.echo(f"optical magnification Mo = {data['optical_magnification']:.2f}x")
    click.echo(f"digital magnification Md = {data['digital_magnification']:.1f}x")
    click.echo(f"object pixel pitch = {data['object_pixel_pitch_um']:.4f} um/px")
    click.echo(f"field of view diameter = {data['fov_diameter_um']:g} um")
    if out_path:
        rpt.write_csv(out_path, ("key", "value"), sorted(data.items()))


if __name__ == "__main__":
    main()
