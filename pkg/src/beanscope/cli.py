"""Command-line entry point; subcommands compose through files only."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import plots, store
from .classifier import (DEFECTIVE, GRADES, QUALIFIED, LinearModel, MulticlassModel,
                         TrainConfig, decision_value, predict, train_binary, train_multiclass)
from .dataset import bean_id, feature_records, label_regions, load_labeled_beans
from .errors import BeanscopeError, SchemeMismatch
from .evaluation import (confusion_matrix, default_ratios, evaluate_binary, format_percent,
                         parse_ratios, ratio_sweep, stratified_split)
from .features import FeatureScheme, extract, histogram
from .imaging import Channel, SegmentationConfig, crop_bean, find_bean_regions, load_image, \
    save_ppm, whiten_unmasked
from .seeding import SEED_ENV, default_seed
from .synth import gen_dataset

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class UsageError(BeanscopeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _seed_arg(p):
    p.add_argument("--seed", type=int, default=None,
                   help=f"random seed (default: ${SEED_ENV} or 0)")


def _seg_args(p):
    p.add_argument("--threshold", type=int, default=163, help="background threshold (163)")
    p.add_argument("--min-pixels", type=int, default=200, help="smallest bean region (200)")
    p.add_argument("--max-pixels", type=int, default=20000, help="largest bean region (20000)")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)


def _train_args(p):
    p.add_argument("--c", type=float, default=1.0, help="soft-margin penalty (1.0)")
    p.add_argument("--tolerance", type=float, default=1e-3, help="KKT tolerance (1e-3)")
    p.add_argument("--max-epochs", type=int, default=1000)
    _seed_arg(p)


def _seg_config(a) -> SegmentationConfig:
    return SegmentationConfig(a.threshold, a.min_pixels, a.max_pixels, a.connectivity)


def _train_config(a) -> TrainConfig:
    return TrainConfig(a.c, a.tolerance, a.max_epochs, a.seed)


def _scheme(text) -> FeatureScheme:
    try:
        return FeatureScheme.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _ratio(text) -> float:
    r = float(text)
    if not 0 < r < 1:
        raise argparse.ArgumentTypeError(f"ratio must lie in (0, 1), got {text}")
    return r


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="beanscope", description="Green coffee bean colour grading pipeline.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic snapshot dataset")
    p.add_argument("--site-profile", action="append", default=None,
                   help="site profile name (repeatable; default default1)")
    p.add_argument("--defect-profile", default="default")
    p.add_argument("--profiles", help="profile JSON file (default: bundled profiles)")
    p.add_argument("--qualified", type=int, default=300, help="qualified beans per site")
    p.add_argument("--defective", type=int, default=300, help="defective beans per site")
    p.add_argument("--grid", default="8x8", help="beans per snapshot as ROWSxCOLS")
    p.add_argument("--out", required=True, help="output directory")
    _seed_arg(p)

    p = sub.add_parser("segment", help="crop beans out of snapshots")
    p.add_argument("--manifest", help="dataset manifest naming the snapshots")
    p.add_argument("--image", action="append", default=[], help="snapshot file (repeatable)")
    p.add_argument("--out", required=True, help="directory for crops and regions.csv")
    _seg_args(p)

    p = sub.add_parser("extract", help="compute per-bean feature vectors")
    p.add_argument("--manifest", help="labelled dataset manifest")
    p.add_argument("--image", action="append", default=[], help="unlabelled snapshot")
    p.add_argument("--scheme", type=_scheme, default=FeatureScheme("six"),
                   help="two-r|two-g|two-b|six|hist768 (six)")
    p.add_argument("--out", required=True, help="feature CSV")
    p.add_argument("--hist-dir", help="also write one histogram CSV per bean here")
    _seg_args(p)

    p = sub.add_parser("train", help="train a qualified/defective linear SVM")
    p.add_argument("--features", required=True)
    p.add_argument("--scheme", type=_scheme, help="expected feature scheme")
    p.add_argument("--ratio", type=_ratio, help="train on this stratified fraction only")
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--test-out", help="write the held-out feature rows here")
    _train_args(p)

    p = sub.add_parser("classify", help="grade beans with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="verdict CSV")

    p = sub.add_parser("eval", help="accuracy rate of a model on labelled features")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--ratio", type=_ratio,
                   help="evaluate only the held-out side of the split made by train")
    p.add_argument("--out", help="report CSV")
    _seed_arg(p)

    p = sub.add_parser("sweep", help="accuracy across training ratios")
    p.add_argument("--features", required=True)
    p.add_argument("--ratios", default="0.05:0.95:0.05", help="start:stop:step or a,b,c")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", required=True, help="sweep CSV (one row per ratio)")
    p.add_argument("--runs-out", help="report CSV with one row per run")
    _train_args(p)

    p = sub.add_parser("sites", help="one-vs-one site discrimination")
    p.add_argument("--features", required=True)
    p.add_argument("--ratio", type=_ratio, default=0.4)
    p.add_argument("--all-beans", action="store_true",
                   help="include defective beans (default: qualified only)")
    p.add_argument("--out", required=True, help="confusion matrix CSV")
    p.add_argument("--model-out", help="multiclass model JSON")
    _train_args(p)

    p = sub.add_parser("plot", help="render a CSV as an SVG chart")
    p.add_argument("--kind", required=True, choices=("scatter", "curve", "accuracy", "confusion"))
    p.add_argument("--in", dest="inputs", action="append", required=True,
                   help="input CSV (repeatable for --kind accuracy)")
    p.add_argument("--out", required=True, help="SVG file")
    p.add_argument("--model", help="two-<c> model whose separatrix to draw (scatter)")
    p.add_argument("--channel", default=None, help="channel to plot from six-stat features")
    p.add_argument("--label", action="append", default=[], help="series names (accuracy)")
    p.add_argument("--qualified-color", default=plots.QUALIFIED_COLOR)
    p.add_argument("--defective-color", default=plots.DEFECTIVE_COLOR)
    p.add_argument("--title", default="")
    return parser


# --- subcommands -------------------------------------------------------------

def _write(path, text):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_gen(a):
    sites, defects = store.load_profiles(a.profiles)
    names = a.site_profile or ["default1"]
    try:
        chosen = [sites[n] for n in names]
        defect = defects[a.defect_profile]
    except KeyError as exc:
        raise UsageError(f"unknown profile {exc.args[0]!r}; available: "
                         f"{sorted(sites)} / {sorted(defects)}") from None
    try:
        rows, cols = (int(v) for v in a.grid.lower().split("x"))
    except ValueError:
        raise UsageError(f"--grid must look like 8x8, got {a.grid!r}") from None
    counts = {s.site_id: (a.qualified, a.defective) for s in chosen}
    manifest = gen_dataset(chosen, defect, counts, a.seed, a.out, (rows, cols))
    print(f"wrote {len(manifest)} beans to {os.path.join(a.out, 'manifest.csv')}")


def _image_list(a):
    if a.manifest:
        records = store.read_manifest(a.manifest)
        root = os.path.dirname(a.manifest)
        return [os.path.join(root, f) for f in sorted({r.file for r in records})]
    if not a.image:
        raise UsageError("give --manifest or at least one --image")
    return a.image


def cmd_segment(a):
    cfg = _seg_config(a)
    os.makedirs(a.out, exist_ok=True)
    rows = []
    for path in _image_list(a):
        image_id = os.path.splitext(os.path.basename(path))[0]
        img = load_image(path)
        for k, region in enumerate(find_bean_regions(img, cfg, image_id)):
            bean = crop_bean(img, region)
            save_ppm(whiten_unmasked(bean), os.path.join(a.out, f"{bean_id(image_id, k)}.ppm"))
            rows.append((os.path.basename(path), k, *region.bounding_box, region.pixel_count))
    _write(os.path.join(a.out, "regions.csv"), store._csv_text(
        ("file", "region_index", "x0", "y0", "width", "height", "pixel_count"), rows))
    print(f"found {len(rows)} beans")


def cmd_extract(a):
    cfg = _seg_config(a)
    if a.manifest:
        beans = load_labeled_beans(store.read_manifest(a.manifest),
                                   os.path.dirname(a.manifest), cfg)
        records = feature_records(beans, a.scheme)
        crops = [(b.bean_id, b.bean) for b in beans]
    else:
        if not a.image:
            raise UsageError("give --manifest or at least one --image")
        records, crops = [], []
        for path in a.image:
            image_id = os.path.splitext(os.path.basename(path))[0]
            img = load_image(path)
            for k, region in enumerate(find_bean_regions(img, cfg, image_id)):
                bean = crop_bean(img, region)
                bid = bean_id(image_id, k)
                records.append(store.FeatureRecord(extract(bean, a.scheme, bid),
                                                   "unlabeled", "unknown"))
                crops.append((bid, bean))
    if not records:
        raise UsageError("no beans found")
    store.write_features(records, a.out)
    if a.hist_dir:
        os.makedirs(a.hist_dir, exist_ok=True)
        for bid, bean in crops:
            store.write_histogram([histogram(bean, ch) for ch in Channel],
                                  os.path.join(a.hist_dir, f"{bid}.hist.csv"))
    print(f"wrote {len(records)} {a.scheme} feature rows to {a.out}")


def _graded(records, path):
    bad = sorted({r.label for r in records} - set(GRADES))
    if bad:
        raise UsageError(f"{path}: labels {bad} are not {QUALIFIED}/{DEFECTIVE}")
    return [r.sample("label") for r in records]


def _check_scheme(records, expected, path):
    schemes = {r.features.scheme for r in records}
    if len(schemes) != 1:
        raise SchemeMismatch(f"{path}: mixed feature schemes {sorted(map(str, schemes))}")
    scheme = schemes.pop()
    if expected is not None and scheme != expected:
        raise SchemeMismatch(f"{path}: feature scheme is {scheme}, expected {expected}")
    return scheme


def cmd_train(a):
    records = store.read_features(a.features)
    _check_scheme(records, a.scheme, a.features)
    samples = _graded(records, a.features)
    cfg = _train_config(a)
    if a.ratio is not None:
        split = stratified_split(samples, a.ratio, a.seed)
        train, test = split.train, split.test
    else:
        train, test = samples, []
    model = train_binary(train, cfg)
    store.save_model(model, a.out)
    if a.test_out:
        held = {s.features.bean_id for s in test}
        store.write_features([r for r in records if r.bean_id in held], a.test_out)
    print(f"trained {model.scheme} model on {len(train)} beans "
          f"({len(model.epoch_objectives)} epochs)")


def _load(path, kind):
    model = store.load_model(path)
    if not isinstance(model, kind):
        raise UsageError(f"{path}: expected a {kind.__name__}")
    return model


def cmd_classify(a):
    model = _load(a.model, LinearModel)
    records = store.read_features(a.features)
    _check_scheme(records, model.scheme, a.features)
    rows = [(r.bean_id, store.fmt_float(decision_value(model, r.features)),
             predict(model, r.features)) for r in records]
    _write(a.out, store._csv_text(("bean_id", "z", "verdict"), rows))
    print(f"classified {len(rows)} beans")


def cmd_eval(a):
    model = _load(a.model, LinearModel)
    records = store.read_features(a.features)
    _check_scheme(records, model.scheme, a.features)
    samples = _graded(records, a.features)
    test = samples
    n_train = 0
    if a.ratio is not None:
        split = stratified_split(samples, a.ratio, a.seed)
        test, n_train = split.test, len(split.train)
    report = evaluate_binary(model, test)
    if a.out:
        store.write_report([(a.ratio, 0, a.seed, n_train, len(test), report)], a.out)
    print(f"PQ {report.pq}  PD {report.pd}  of {report.test_total}")
    print(f"accuracy {format_percent(report.accuracy)}")


def cmd_sweep(a):
    records = store.read_features(a.features)
    _check_scheme(records, None, a.features)
    samples = _graded(records, a.features)
    try:
        ratios = parse_ratios(a.ratios) if a.ratios else default_ratios()
    except ArithmeticError:
        raise UsageError(f"bad --ratios {a.ratios!r}") from None
    if a.repeats < 1:
        raise UsageError("--repeats must be at least 1")
    result = ratio_sweep(samples, ratios, _train_config(a), a.repeats)
    store.write_sweep(result, a.out)
    if a.runs_out:
        store.write_report([(r.ratio, r.repeat, r.seed, r.train_size, r.test_size, r.report)
                            for r in result.runs], a.runs_out)
    for row in result.rows:
        print(f"{row.ratio:.2f}  {format_percent(row.accuracy)}")


def cmd_sites(a):
    records = store.read_features(a.features)
    _check_scheme(records, None, a.features)
    if not a.all_beans:
        records = [r for r in records if r.label == QUALIFIED]
    samples = [r.sample("site") for r in records]
    split = stratified_split(samples, a.ratio, a.seed)
    model = train_multiclass(split.train, _train_config(a))
    cm = confusion_matrix(model, split.test)
    store.write_confusion(cm, a.out)
    if a.model_out:
        store.save_model(model, a.model_out)
    print(f"sites {', '.join(cm.classes)}: accuracy {format_percent(cm.accuracy)}")


def _separatrix(model: LinearModel):
    """Line a*x + b*y = c in raw (mean, std) coordinates."""
    w = model.weights / model.scale
    return float(w[0]), float(w[1]), float(model.bias + w @ model.shift)


def cmd_plot(a):
    if a.kind == "scatter":
        records = store.read_features(a.inputs[0])
        scheme = _check_scheme(records, None, a.inputs[0])
        if scheme.kind == "two":
            cols, channel = (0, 1), scheme.channel
        elif scheme.kind == "six":
            channel = Channel.parse(a.channel or "r")
            cols = (int(channel), int(channel) + 3)
        else:
            raise UsageError("scatter needs two-<c> or six features")
        line = None
        if a.model:
            model = _load(a.model, LinearModel)
            if model.scheme.kind != "two" or model.scheme.channel != channel:
                raise SchemeMismatch(f"separatrix needs a two-{channel.letter} model, "
                                     f"got {model.scheme}")
            line = _separatrix(model)
        pts = [(r.features.values[cols[0]], r.features.values[cols[1]], r.label)
               for r in records]
        svg = plots.scatter_svg(pts, line, a.title or f"{channel.name.lower()} channel",
                                f"{channel.name.lower()} mean", f"{channel.name.lower()} std",
                                colors=(a.qualified_color, a.defective_color))
    elif a.kind == "curve":
        svg = plots.curves_svg(_curves(a.inputs, a.channel), a.title or "distribution curves")
    elif a.kind == "accuracy":
        names = a.label + [os.path.splitext(os.path.basename(p))[0]
                           for p in a.inputs[len(a.label):]]
        series = [(n, store.read_sweep(p)) for n, p in zip(names, a.inputs)]
        svg = plots.accuracy_svg(series, a.title or "accuracy rate versus training ratio")
    else:
        svg = plots.confusion_svg(store.read_confusion(a.inputs[0]),
                                  a.title or "confusion matrix")
    _write(a.out, svg)
    print(f"wrote {a.out}")


def _curves(paths, channel_name):
    """Curves from histogram CSVs or from hist768 feature tables."""
    channel = Channel.parse(channel_name or "r")
    curves = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline()
        if header.startswith("channel,"):
            for h in store.read_histogram(path):
                if h.channel == channel:
                    curves.append(("Qualified", h.frequencies()))
            continue
        records = store.read_features(path)
        _check_scheme(records, FeatureScheme("hist768"), path)
        lo = 256 * int(channel)
        curves += [(r.label, r.features.values[lo:lo + 256]) for r in records]
    return curves


COMMANDS = {"gen": cmd_gen, "segment": cmd_segment, "extract": cmd_extract,
            "train": cmd_train, "classify": cmd_classify, "eval": cmd_eval,
            "sweep": cmd_sweep, "sites": cmd_sites, "plot": cmd_plot}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USER
    if getattr(args, "seed", "absent") is None:
        try:
            args.seed = default_seed()
        except ValueError:
            print(f"beanscope: error: ${SEED_ENV} is not an integer", file=sys.stderr)
            return EXIT_USER
    try:
        COMMANDS[args.command](args)
    except (BeanscopeError, OSError, ValueError) as exc:
        print(f"beanscope {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        print(f"beanscope {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
