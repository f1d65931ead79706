"""Command-line surface: synth, features, balance, train, classify, hfom, ssim."""

import argparse
import csv
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import hfom as hfom_mod
from . import imgcore, synth
from .balance import balance_dataset
from .dataset import Dataset, read_feature_csv, write_feature_csv
from .features import LABELS, FeatureVector, extract_features
from .learners import GradientBoosting, RandomForest, evaluate, load_model, save_model, train_validate
from .ucflem import UcflemConfig, classify_dataset

__all__ = ["RunConfig", "parse_manifest", "main"]


@dataclass
class RunConfig:
    s: int = 160            # crop/resize side
    t: int = 127            # binarization threshold
    b_s: int = 15           # block side
    n: int = 10             # fingerprints feeding the hybrid map
    epsilon: float = 1e16   # SSRVR scale factor
    split_ratio: float = 0.7
    seed: int = 0
    balance: int = 1
    rf_trees: int = 100
    rf_depth: int = 8
    gb_rounds: int = 100
    gb_rate: float = 0.1
    gb_depth: int = 3

    def rf_params(self):
        return {"n_trees": self.rf_trees, "max_depth": self.rf_depth}

    def gb_params(self):
        return {
            "n_rounds": self.gb_rounds,
            "learning_rate": self.gb_rate,
            "max_depth": self.gb_depth,
        }


def load_config(path):
    """Flat `key = value` config file."""
    cfg = RunConfig()
    types = {f.name: f.type for f in fields(RunConfig)}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            setattr(cfg, key, (float if types[key] is float else int)(value))
    return cfg


def write_effective_config(cfg, out_dir):
    path = Path(out_dir) / "effective_config.txt"
    with open(path, "w") as fh:
        for f in fields(RunConfig):
            fh.write(f"{f.name} = {getattr(cfg, f.name)!r}\n")
    return path


def parse_manifest(path):
    """Rows of (resolved image path, label or None) from a `path,label` CSV."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    base = path.parent
    rows = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["path", "label"]:
            raise ValueError(f"{path}: expected header 'path,label'")
        for lineno, row in enumerate(reader, 2):
            if not row or not row[0].strip():
                continue
            raw = row[0].strip()
            label = row[1].strip() if len(row) > 1 and row[1].strip() else None
            if label is not None and label not in LABELS:
                raise ValueError(f"{path}:{lineno}: unknown label {label!r}")
            if raw in seen:
                raise ValueError(f"{path}:{lineno}: duplicate path {raw!r}")
            seen.add(raw)
            resolved = Path(raw)
            if not resolved.is_absolute():
                resolved = base / resolved
            rows.append((resolved, label))
    return rows


def _manifest_features(manifest_rows, cfg, require_labels):
    ids, X, y = [], [], []
    for img_path, label in manifest_rows:
        if require_labels and label is None:
            raise ValueError(f"{img_path}: missing label")
        img = imgcore.crop_resize(imgcore.load_image(img_path), cfg.s)
        fv = extract_features(img, b_s=cfg.b_s, epsilon=cfg.epsilon)
        ids.append(img_path.name)
        X.append(fv.as_array())
        y.append(label)
    return ids, np.array(X), y


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_synth(args):
    out = _out_dir(args)
    cfg = _config(args)
    counts = {}
    for part in args.counts.split(","):
        label, _, value = part.partition("=")
        if label.strip() not in LABELS or not value:
            raise ValueError(f"bad counts spec {part!r}; use e.g. dry=20,standard=30,wet=10")
        counts[label.strip()] = int(value)
    manifest = synth.synth_dataset(out, counts, seed=cfg.seed, side=cfg.s)
    write_effective_config(cfg, out)
    print(f"wrote {sum(counts.values())} images and {manifest}")
    return 0


def cmd_features(args):
    out = _out_dir(args)
    cfg = _config(args)
    rows = parse_manifest(args.manifest)
    ids, X, y = _manifest_features(rows, cfg, require_labels=True)
    data = Dataset(X, np.array(y, dtype=object), ids)
    path = out / "features.csv"
    write_feature_csv(data, path)
    write_effective_config(cfg, out)
    print(f"wrote {path} ({len(data)} rows)")
    return 0


def cmd_balance(args):
    out = _out_dir(args)
    cfg = _config(args)
    data = read_feature_csv(args.features)
    balanced, report = balance_dataset(data, seed=cfg.seed)
    write_feature_csv(balanced, out / "balanced.csv")
    report.write_log(out / "balance_log.csv")
    write_effective_config(cfg, out)
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"balanced {data.class_counts()} -> {balanced.class_counts()}")
    return 0


def cmd_train(args):
    out = _out_dir(args)
    cfg = _config(args)
    data = read_feature_csv(args.features)
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(data))
    n_train = int(round(cfg.split_ratio * len(data)))
    train = data.subset(order[:n_train])
    test = data.subset(order[n_train:])
    if args.learner == "rf":
        model = RandomForest(random_state=cfg.seed, **cfg.rf_params())
    else:
        model = GradientBoosting(random_state=cfg.seed, **cfg.gb_params())
    model, accuracy = train_validate(model, train.X, train.y, seed=cfg.seed)
    save_model(model, out / "model.json", validation_accuracy=accuracy)
    metrics = evaluate(test.y, model.predict(test.X), classes=data.classes())
    with open(out / "metrics.json", "w") as fh:
        json.dump(metrics.to_dict(), fh, indent=2)
    write_effective_config(cfg, out)
    print(f"validation accuracy {accuracy:.4f}; test accuracy {metrics.accuracy:.4f}")
    return 0


def cmd_classify(args):
    out = _out_dir(args)
    cfg = _config(args)
    if args.features:
        data = read_feature_csv(args.features)
    elif not args.manifest:
        raise ValueError("classify needs --features or --manifest")
    else:
        rows = parse_manifest(args.manifest)
        ids, X, y = _manifest_features(rows, cfg, require_labels=True)
        data = Dataset(X, np.array(y, dtype=object), ids)
    ucfg = UcflemConfig(
        split_ratio=cfg.split_ratio,
        seed=cfg.seed,
        balance=bool(cfg.balance),
        rf_params=cfg.rf_params(),
        gb_params=cfg.gb_params(),
    )
    labels, metrics, (phase1, phase2), test_idx = classify_dataset(data, ucfg)
    report = {
        **metrics.to_dict(),
        "phase1": {"rho": len(phase1.resolved), "tau": len(phase1.tau)},
        "phase2": {"rho": len(phase2.resolved), "tau": len(phase2.tau)},
        "seeds": {"seed": cfg.seed},
    }
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    with open(out / "report.txt", "w") as fh:
        fh.write(f"accuracy  {metrics.accuracy:.4f}\n")
        fh.write(f"precision {metrics.macro_precision:.4f}\n")
        fh.write(f"recall    {metrics.macro_recall:.4f}\n")
        fh.write(f"f1        {metrics.macro_f1:.4f}\n")
        fh.write(f"phase1 rho/tau: {len(phase1.resolved)}/{len(phase1.tau)}\n")
        fh.write(f"phase2 rho/tau: {len(phase2.resolved)}/{len(phase2.tau)}\n")
    with open(out / "predictions.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id", "true_label", "predicted_label"])
        for idx, label in zip(test_idx, labels):
            writer.writerow([data.ids[idx], data.y[idx], label])
    write_effective_config(cfg, out)
    print(f"accuracy {metrics.accuracy:.4f}, macro F1 {metrics.macro_f1:.4f}")
    return 0


def _standard_pool(args, cfg):
    rows = parse_manifest(args.manifest)
    model = None
    if getattr(args, "model", None):
        model, _ = load_model(args.model)
    pool = []
    for img_path, label in rows:
        img = imgcore.crop_resize(imgcore.load_image(img_path), cfg.s)
        fv = extract_features(img, b_s=cfg.b_s, epsilon=cfg.epsilon)
        if label is None:
            if model is None:
                raise ValueError(
                    f"{img_path}: unlabeled image and no --model given to classify it"
                )
            label = model.predict(fv.as_array().reshape(1, -1))[0]
        if label == "standard":
            pool.append((img_path.name, img, fv))
    return pool


def cmd_hfom(args):
    out = _out_dir(args)
    cfg = _config(args)
    pool = _standard_pool(args, cfg)
    if len(pool) < max(4, cfg.n):
        print(
            f"error: insufficient standard fingerprints ({len(pool)} < {max(4, cfg.n)})",
            file=sys.stderr,
        )
        return 1
    result = hfom_mod.hfom_pipeline(
        pool,
        hfom_mod.HfomConfig(
            n=cfg.n, threshold=cfg.t, b_s=cfg.b_s, assignment_seed=None
        ),
    )
    imgcore.save_image(result.hfom.image, out / "hfom.png")
    with open(out / "stage_report.txt", "w") as fh:
        fh.write(f"{'Step Followed':<46}Common Pixels on Image Stack\n")
        for name, count in result.stages:
            fh.write(f"{name:<46}{count}\n")
    with open(out / "provenance.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quadrant", "source_index", "source_id"])
        for iota, z in result.hfom.provenance:
            writer.writerow([iota, z, pool[z][0]])
    write_effective_config(cfg, out)
    print(f"wrote {out / 'hfom.png'}")
    return 0


def cmd_ssim(args):
    out = _out_dir(args)
    cfg = _config(args)
    rows = parse_manifest(args.manifest)
    ids, images = [], []
    for img_path, _ in rows:
        img = imgcore.crop_resize(imgcore.load_image(img_path), cfg.s)
        if args.binarize:
            img = imgcore.binarize(img, cfg.t)
        ids.append(img_path.name)
        images.append(img)
    path = out / "ssim.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + ids)
        for i, a in enumerate(images):
            writer.writerow([ids[i]] + [repr(hfom_mod.ssim(a, b)) for b in images])
    write_effective_config(cfg, out)
    print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hfomkit",
        description="Fingerprint dry/standard/wet classification and hybrid orientation maps",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest=False, features=False, optional=False):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if manifest:
            p.add_argument("--manifest", required=not optional, help="path,label CSV manifest")
        if features:
            p.add_argument("--features", required=not optional and not manifest,
                           help="feature CSV from the features command")

    p = sub.add_parser("synth", help="generate a synthetic labeled image set")
    common(p)
    p.add_argument("--counts", required=True, help="e.g. dry=20,standard=30,wet=10")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="extract the six features per image")
    common(p, manifest=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("balance", help="oversample minority classes")
    common(p, features=True)
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("train", help="train a single ensemble learner")
    common(p, features=True)
    p.add_argument("--learner", choices=("rf", "gb"), default="rf")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="run the dual-phase classifier end to end")
    common(p, manifest=True, features=True, optional=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("hfom", help="generate the hybrid fingerprint orientation map")
    common(p, manifest=True)
    p.add_argument("--model", help="serialized model for classifying unlabeled images")
    p.set_defaults(func=cmd_hfom)

    p = sub.add_parser("ssim", help="pairwise shifted-SSIM heatmap")
    common(p, manifest=True)
    p.add_argument("--binarize", action="store_true", help="compare binarized images")
    p.set_defaults(func=cmd_ssim)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
