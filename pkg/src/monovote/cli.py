"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 malformed input, 4 invalid values.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import centroid, evaluation, fitting, kitti_io, pipeline, synth
from .errors import FormatError, MonovoteError
from .voting import GaussianOffsetModel, LinearHead, read_attention_rows

log = logging.getLogger("monovote")

EXIT_USAGE, EXIT_FORMAT, EXIT_VALIDATION = 2, 3, 4


def _pmap(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _read_text(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read file ({exc.strerror})", path=path) from None


def _load(loader, path):
    try:
        return loader(_read_text(path))
    except MonovoteError as exc:
        raise exc.at(path=path) if hasattr(exc, "at") else exc


def _calib(args, fid):
    return kitti_io.read_calibration(kitti_io.frame_path(args.calib, fid), camera=args.camera)


def _labels_or_empty(directory, fid, reader):
    p = kitti_io.frame_path(directory, fid)
    return reader(p) if p.exists() else []


# -- subcommands -------------------------------------------------------------------

def cmd_stats(args):
    fids = kitti_io.list_frames(args.labels)

    def load(fid):
        dets = None
        if args.dets:
            dets = _labels_or_empty(args.dets, fid, kitti_io.read_detections)
        return _calib(args, fid), kitti_io.read_labels(kitti_io.frame_path(args.labels, fid)), dets

    frames = _pmap(load, fids, args.threads)
    if args.prior:
        prior = _load(centroid.HeightPrior.loads, args.prior)
    else:
        prior = centroid.fit_height_prior((o for _, objs, _ in frames for o in objs), [args.class_name])
    dets = [d for _, _, d in frames] if args.dets else None
    stats = centroid.depth_error_stats([(c, o) for c, o, _ in frames], prior, args.class_name, dets)
    if args.out:
        kitti_io.atomic_write(args.out, stats.to_csv())
    else:
        sys.stdout.write(stats.to_csv())
    print(f"{args.class_name}: {stats.summary()} h_bar={prior[args.class_name]:.4f}")


def cmd_fit_prior(args):
    objs = []
    for fid in kitti_io.list_frames(args.labels):
        objs.extend(kitti_io.read_labels(kitti_io.frame_path(args.labels, fid)))
    prior = centroid.fit_height_prior(objs, args.class_name or None)
    kitti_io.atomic_write(args.out, prior.dumps())
    print(prior.dumps(), end="")


def cmd_fit_gpd(args):
    offsets = fitting.read_offsets(args.offsets)
    mle = fitting.fit_gaussian_mle(offsets)
    if args.method == "mle":
        model = mle
    else:
        init = GaussianOffsetModel((0.0, 0.0), (1.0, 1.0))
        model = fitting.fit_gaussian_kl(offsets, init, lr=args.lr, iters=args.iters)
    kitti_io.atomic_write(args.out, model.dumps())
    print(f"mu=({model.mu[0]:.6g}, {model.mu[1]:.6g}) var=({model.var[0]:.6g}, {model.var[1]:.6g})")


def _attention(args, fid):
    if not args.aam:
        return None
    for suffix in (".csv", ".bin"):
        p = kitti_io.frame_path(args.aam, fid, suffix)
        if p.exists():
            return read_attention_rows(p, args.grid)
    raise FormatError(f"no attention file for frame {fid}", path=args.aam)


def cmd_fit_head(args):
    prior = _load(centroid.HeightPrior.loads, args.prior)
    gpd = _load(GaussianOffsetModel.loads, args.gpd)
    fids = kitti_io.list_frames(args.labels)

    def load(fid):
        objs = kitti_io.read_labels(kitti_io.frame_path(args.labels, fid))
        return _calib(args, fid), objs, _attention(args, fid)

    frames = _pmap(load, fids, args.threads)
    X, Y = pipeline.training_pairs(frames, prior, gpd, args.grid, not args.pixel_offsets)
    head = fitting.fit_linear_head(X, Y, ridge=args.ridge)
    head.save(args.out)
    print(f"fitted linear head on {len(X)} objects")


def cmd_infer(args):
    prior = _load(centroid.HeightPrior.loads, args.prior)
    gpd = _load(GaussianOffsetModel.loads, args.gpd)
    linear = None
    if args.head == "linear":
        if not args.head_params:
            raise argparse.ArgumentTypeError("--head linear requires --head-params")
        linear = LinearHead.load(args.head_params)
    out = Path(args.out)

    def run(fid):
        rois = pipeline.read_rois(kitti_io.frame_path(args.boxes2d, fid))
        dets = pipeline.infer_frame(_calib(args, fid), rois, prior, gpd, _attention(args, fid),
                                    args.grid, args.head, linear, not args.pixel_offsets)
        kitti_io.write_lines(out / f"{fid}.txt", [kitti_io.write_detection_line(d) for d in dets])
        return len(dets)

    fids = kitti_io.list_frames(args.boxes2d)
    n = sum(_pmap(run, fids, args.threads))
    print(f"wrote {n} detections for {len(fids)} frames to {out}")


def _eval_frames(args):
    fids = kitti_io.list_frames(args.gts)

    def load(fid):
        gts = kitti_io.read_labels(kitti_io.frame_path(args.gts, fid))
        return _labels_or_empty(args.dets, fid, kitti_io.read_detections), gts

    return _pmap(load, fids, args.threads)


def cmd_eval(args):
    frames = _eval_frames(args)
    rows = []
    for metric in args.metric:
        for iou in args.iou:
            for regime in args.regime:
                cfg = evaluation.EvalConfig(iou, metric, args.ap, args.class_name,
                                            evaluation.REGIMES[regime])
                ap = evaluation.evaluate(frames, cfg)
                rows.append(evaluation.EvalRow(args.class_name, cfg.regime.name, metric, iou,
                                               args.ap, ap))
    print(evaluation.format_report_table(rows), end="")
    if args.out:
        kitti_io.atomic_write(args.out, evaluation.format_report_csv(rows))


def cmd_mce(args):
    frames = _eval_frames(args)
    curve = evaluation.mce_curve(frames, args.bin, args.max_dist, args.class_name)
    if args.out:
        kitti_io.atomic_write(args.out, curve.to_csv())
    else:
        sys.stdout.write(curve.to_csv())
    if args.plot:
        kitti_io.atomic_write(args.plot, curve.to_plot_data())


def cmd_synth(args):
    cfg = _load(synth.parse_config, args.config)
    if args.frames is not None:
        cfg = replace(cfg, n_frames=args.frames)

    def gen(i):
        cam, objs = synth.generate_scene(cfg, i)
        return synth.SynthFrame(kitti_io.format_frame_id(i), cam, objs,
                                synth.synth_attention(cfg, cam, objs, i))

    frames = _pmap(gen, range(cfg.n_frames), args.threads)
    synth.write_corpus(frames, args.out, cfg)
    print(f"wrote {len(frames)} frames to {args.out}")


# -- parser ------------------------------------------------------------------------

def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="monovote", allow_abbrev=False,
                                description="Monocular 3D centroid voting and KITTI-style evaluation.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_, allow_abbrev=False)
        sp.set_defaults(func=fn)
        return sp

    def threads(sp):
        sp.add_argument("--threads", type=_positive_int, default=1, help="frames processed in parallel")

    def camera(sp):
        sp.add_argument("--camera", default="P2", help="projection matrix key in calib files (default P2)")

    sp = add("stats", cmd_stats, "Pinhole depth-error statistics (histogram CSV + summary line).")
    sp.add_argument("--labels", required=True, help="directory of KITTI label files")
    sp.add_argument("--calib", required=True, help="directory of KITTI calib files")
    sp.add_argument("--class", dest="class_name", default="Car", help="object class (default Car)")
    sp.add_argument("--prior", help="height prior file; fitted from --labels when omitted")
    sp.add_argument("--dets", help="take apparent heights from these detections instead of ground truth")
    sp.add_argument("--out", help="write the histogram CSV here instead of stdout")
    camera(sp)
    threads(sp)

    sp = add("fit-prior", cmd_fit_prior, "Fit per-class mean 3D heights from labels.")
    sp.add_argument("--labels", required=True, help="directory of KITTI label files")
    sp.add_argument("--out", required=True, help="output prior file")
    sp.add_argument("--class", dest="class_name", action="append", help="restrict to class (repeatable)")

    sp = add("fit-gpd", cmd_fit_gpd, "Fit the projection-offset Gaussian from an offsets CSV.")
    sp.add_argument("--offsets", required=True, help="CSV with frame_id,object_id,du,dv")
    sp.add_argument("--method", choices=["mle", "kl"], default="mle", help="closed form or KL descent")
    sp.add_argument("--lr", type=float, default=0.1, help="KL descent learning rate")
    sp.add_argument("--iters", type=int, default=20000, help="KL descent iteration cap")
    sp.add_argument("--out", required=True, help="output model file")

    sp = add("fit-head", cmd_fit_head, "Fit the linear voting head by ridge least squares.")
    sp.add_argument("--labels", required=True, help="directory of KITTI label files")
    sp.add_argument("--calib", required=True, help="directory of KITTI calib files")
    sp.add_argument("--prior", required=True, help="height prior file")
    sp.add_argument("--gpd", required=True, help="offset Gaussian file")
    sp.add_argument("--aam", help="directory of per-frame attention maps (.csv or .bin)")
    sp.add_argument("--grid", type=_positive_int, default=centroid.DEFAULT_GRID, help="grid side s")
    sp.add_argument("--ridge", type=float, default=fitting.DEFAULT_RIDGE, help="ridge penalty")
    sp.add_argument("--pixel-offsets", action="store_true", help="offsets in pixels, not RoI units")
    sp.add_argument("--out", required=True, help="output head parameter file")
    camera(sp)
    threads(sp)

    sp = add("infer", cmd_infer, "Localize 2D boxes in 3D and write KITTI result files.")
    sp.add_argument("--boxes2d", required=True, help="directory of per-frame 2D box files")
    sp.add_argument("--calib", required=True, help="directory of KITTI calib files")
    sp.add_argument("--prior", required=True, help="height prior file")
    sp.add_argument("--gpd", required=True, help="offset Gaussian file")
    sp.add_argument("--aam", help="directory of per-frame attention maps; uniform 0.5 when omitted")
    sp.add_argument("--head", choices=["mean", "linear"], default="mean", help="localization head")
    sp.add_argument("--head-params", help="linear head parameter file")
    sp.add_argument("--grid", type=_positive_int, default=centroid.DEFAULT_GRID, help="grid side s")
    sp.add_argument("--pixel-offsets", action="store_true", help="offsets in pixels, not RoI units")
    sp.add_argument("--out", required=True, help="output directory")
    camera(sp)
    threads(sp)

    for name, fn, help_ in (("eval", cmd_eval, "KITTI-style 3D / BEV average precision."),
                            ("mce", cmd_mce, "Mean centroid error binned by distance.")):
        sp = add(name, fn, help_)
        sp.add_argument("--dets", required=True, help="directory of KITTI result files")
        sp.add_argument("--gts", required=True, help="directory of KITTI label files")
        sp.add_argument("--class", dest="class_name", default="Car", help="object class (default Car)")
        sp.add_argument("--out", help="CSV output file")
        threads(sp)
        if name == "eval":
            sp.add_argument("--metric", nargs="+", choices=["bev", "3d"], default=["3d", "bev"],
                            help="overlap metric(s)")
            sp.add_argument("--iou", nargs="+", type=float, choices=[0.5, 0.7], default=[0.5, 0.7],
                            help="IoU threshold(s)")
            sp.add_argument("--regime", nargs="+", choices=list(evaluation.REGIMES),
                            default=list(evaluation.REGIMES), help="difficulty regime(s)")
            sp.add_argument("--ap", type=int, choices=[11, 40], default=11, help="recall sampling points")
        else:
            sp.add_argument("--bin", type=float, default=3.0, help="distance bin width, metres")
            sp.add_argument("--max-dist", type=float, default=60.0, help="largest distance, metres")
            sp.add_argument("--plot", help="gnuplot data output file")

    sp = add("synth", cmd_synth, "Generate a synthetic KITTI-format corpus.")
    sp.add_argument("--config", required=True, help="key = value scene config file")
    sp.add_argument("--frames", type=int, help="override n_frames from the config")
    sp.add_argument("--out", required=True, help="output directory")
    threads(sp)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    except FormatError as exc:
        print(f"monovote: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except MonovoteError as exc:
        print(f"monovote: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
