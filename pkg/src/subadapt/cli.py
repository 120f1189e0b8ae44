"""Command-line surface: synthetic data generation, training, prediction,
cross-validation, and hyperparameter sweeps.

CSV contract: UTF-8, comma-separated, header ``label,f0,...,f{m-1}``. The
label column holds 1, -1, or is empty for unlabeled target rows; labeled
rows must precede unlabeled ones. Every command is deterministic given its
configuration and seed, and all file writes are whole-file atomic.

Exit codes: 0 success, 2 user or validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from .data_model import DatasetPair, FeatureScaler, Hyperparams, LOSS_KINDS, \
    ModelState, NumericError, ValidationError, validate
from .classifier import predict_target
from .evaluation import run_cv
from .trainer import fit

MODEL_FORMAT = "subadapt-model-v1"

SYNTH_DEFAULTS = dict(n1=100, n2=100, n3=20, m=5, shift=1.0, rot_deg=20.0)


# ---------------------------------------------------------------------------
# synthetic data

def make_shifted_pair(seed, n1=100, n2=100, n3=20, m=5, shift=1.0, rot_deg=20.0):
    """Deterministic two-class Gaussian pair with a rotated, shifted target.

    Source: balanced mixture with class means +/- 2*e1 and unit covariance.
    Target: fresh draws from the same mixture, rotated by rot_deg degrees in
    the first two coordinates, then translated by shift along e2. Row order
    is shuffled so the labeled prefix mixes both classes.

    Returns (source_x, source_y, target_x, target_y) with full target
    labels; n3 only governs how many target labels the CSV writer keeps.
    """
    if min(n1, n2, m) < 1 or n3 < 0 or n3 > n2:
        raise ValidationError("counts must be positive with n3 <= n2")
    if m < 2:
        raise ValidationError("the generator needs m >= 2 for its rotation plane")
    rng = np.random.default_rng(seed)

    def sample(n):
        base = np.concatenate([np.ones(n - n // 2, dtype=np.int64),
                               -np.ones(n // 2, dtype=np.int64)])
        labels = base[rng.permutation(n)]
        points = np.zeros((n, m))
        points[:, 0] = 2.0 * labels
        points += rng.standard_normal((n, m))
        return points, labels

    source_x, source_y = sample(n1)
    target_x, target_y = sample(n2)
    angle = math.radians(rot_deg)
    rot = np.eye(m)
    rot[0, 0] = rot[1, 1] = math.cos(angle)
    rot[0, 1] = -math.sin(angle)
    rot[1, 0] = math.sin(angle)
    target_x = target_x @ rot.T
    target_x[:, 1] += shift
    return source_x, source_y, target_x, target_y


# ---------------------------------------------------------------------------
# file formats

def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    os.replace(tmp, path)


def _f17(value) -> str:
    return format(float(value), ".17g")


def write_feature_csv(path, features, labels=None):
    """Write the standard CSV; ``labels`` may cover only a prefix of rows."""
    features = np.asarray(features, dtype=float)
    n, m = features.shape
    n_labeled = 0 if labels is None else len(labels)
    lines = ["label," + ",".join(f"f{j}" for j in range(m))]
    for i in range(n):
        tag = str(int(labels[i])) if i < n_labeled else ""
        lines.append(tag + "," + ",".join(repr(float(v)) for v in features[i]))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_feature_csv(path, require_all_labeled=False):
    """Parse the standard CSV into (features, prefix labels).

    Ragged rows, non-numeric features, bad labels, and labeled rows after
    unlabeled ones are rejected with the offending line number.
    """
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise ValidationError(f"{path}: empty file")
    header = lines[0].split(",")
    if len(header) < 2 or header[0] != "label" or \
            header[1:] != [f"f{j}" for j in range(len(header) - 1)]:
        raise ValidationError(f"{path}: line 1: header must be label,f0,...,f{{m-1}}")
    m = len(header) - 1
    features, labels = [], []
    seen_unlabeled = False
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != m + 1:
            raise ValidationError(
                f"{path}: line {lineno}: expected {m + 1} fields, got {len(cells)}")
        tag = cells[0].strip()
        if tag == "":
            seen_unlabeled = True
        else:
            if seen_unlabeled:
                raise ValidationError(
                    f"{path}: line {lineno}: labeled row after unlabeled rows")
            try:
                label = int(tag)
            except ValueError:
                label = 0
            if label not in (1, -1):
                raise ValidationError(f"{path}: line {lineno}: label outside {{+1,-1}}")
            labels.append(label)
        try:
            features.append([float(c) for c in cells[1:]])
        except ValueError:
            raise ValidationError(f"{path}: line {lineno}: non-numeric feature")
    if not features:
        raise ValidationError(f"{path}: no data rows")
    if require_all_labeled and len(labels) != len(features):
        raise ValidationError(f"{path}: every row must be labeled")
    return np.asarray(features, dtype=float), np.asarray(labels, dtype=np.int64)


def _vector_lines(name, vec):
    return [f"{name} {len(vec)}", " ".join(_f17(v) for v in vec)]


def save_model(path, state: ModelState, hp: Hyperparams, scaler=None):
    """Text model file: explicit dimensions, row-major matrices, 17
    significant digits, the full hyperparameters, and a format version."""
    lines = [MODEL_FORMAT,
             f"loss {state.loss}",
             f"c1 {_f17(hp.c1)}", f"c2 {_f17(hp.c2)}", f"c3 {_f17(hp.c3)}",
             f"r {state.r}", f"k {hp.k}",
             f"delta {_f17(hp.delta)}", f"step {_f17(hp.step)}",
             f"max_outer_iters {hp.max_outer_iters}",
             f"max_inner_iters {hp.max_inner_iters}",
             f"tol {_f17(hp.tol)}", f"seed {hp.seed}",
             f"theta {state.r} {state.m}"]
    for row in state.theta:
        lines.append(" ".join(_f17(v) for v in row))
    for name, vec in (("w", state.w), ("phi", state.phi),
                      ("varphi", state.varphi), ("u", state.u),
                      ("v", state.v), ("pi", state.pi)):
        lines.extend(_vector_lines(name, vec))
    lines.append(f"scaler {1 if scaler is not None else 0}")
    if scaler is not None:
        lines.extend(_vector_lines("mean", scaler.mean))
        lines.extend(_vector_lines("std", scaler.std))
    _atomic_write(path, "\n".join(lines) + "\n")


def load_model(path):
    """Inverse of save_model. Returns (ModelState, Hyperparams, scaler|None)."""
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    cursor = 0

    def take():
        nonlocal cursor
        if cursor >= len(lines):
            raise ValidationError(f"{path}: truncated model file")
        line = lines[cursor]
        cursor += 1
        return line

    def take_field(name):
        parts = take().split()
        if len(parts) != 2 or parts[0] != name:
            raise ValidationError(f"{path}: expected field {name!r}")
        return parts[1]

    def take_vector(name):
        parts = take().split()
        if len(parts) != 2 or parts[0] != name:
            raise ValidationError(f"{path}: expected vector {name!r}")
        count = int(parts[1])
        values = take().split()
        if len(values) != count:
            raise ValidationError(f"{path}: vector {name!r} has wrong length")
        return np.array([float(v) for v in values])

    if take() != MODEL_FORMAT:
        raise ValidationError(f"{path}: unknown model format")
    loss = take_field("loss")
    hp_kwargs = dict(loss=loss)
    hp_kwargs["c1"] = float(take_field("c1"))
    hp_kwargs["c2"] = float(take_field("c2"))
    hp_kwargs["c3"] = float(take_field("c3"))
    hp_kwargs["r"] = int(take_field("r"))
    hp_kwargs["k"] = int(take_field("k"))
    hp_kwargs["delta"] = float(take_field("delta"))
    hp_kwargs["step"] = float(take_field("step"))
    hp_kwargs["max_outer_iters"] = int(take_field("max_outer_iters"))
    hp_kwargs["max_inner_iters"] = int(take_field("max_inner_iters"))
    hp_kwargs["tol"] = float(take_field("tol"))
    hp_kwargs["seed"] = int(take_field("seed"))
    hp = Hyperparams(**hp_kwargs)

    parts = take().split()
    if len(parts) != 3 or parts[0] != "theta":
        raise ValidationError(f"{path}: expected the theta matrix")
    r, m = int(parts[1]), int(parts[2])
    theta = np.empty((r, m))
    for i in range(r):
        values = take().split()
        if len(values) != m:
            raise ValidationError(f"{path}: theta row {i} has wrong length")
        theta[i] = [float(v) for v in values]
    vectors = {name: take_vector(name)
               for name in ("w", "phi", "varphi", "u", "v", "pi")}
    state = ModelState(theta=theta, w=vectors["w"], phi=vectors["phi"],
                       varphi=vectors["varphi"], u=vectors["u"],
                       v=vectors["v"], pi=vectors["pi"], loss=loss)
    scaler = None
    if int(take_field("scaler")):
        scaler = FeatureScaler(mean=take_vector("mean"), std=take_vector("std"))
    return state, hp, scaler


# ---------------------------------------------------------------------------
# run configuration

_HP_FIELDS = ("c1", "c2", "c3", "r", "k", "delta", "step", "loss",
              "max_outer_iters", "max_inner_iters", "tol", "seed")


@dataclass
class RunConfig:
    """Flat bag of every option a command can take; JSON round-trippable."""

    c1: float | None = None
    c2: float | None = None
    c3: float | None = None
    r: int | None = None
    k: int | None = None
    delta: float | None = None
    step: float | None = None
    loss: str | None = None
    max_outer_iters: int | None = None
    max_inner_iters: int | None = None
    tol: float | None = None
    seed: int | None = None
    folds: int | None = None
    normalize: bool | None = None
    source: str | None = None
    target: str | None = None
    model: str | None = None
    output: str | None = None
    report: str | None = None
    trace: str | None = None
    param: str | None = None
    grid: list | None = None

    def to_json(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if v is not None}
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        payload = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ValidationError(f"unknown config fields: {unknown}")
        return cls(**payload)

    def hyperparams(self) -> Hyperparams:
        kwargs = {name: getattr(self, name) for name in _HP_FIELDS
                  if getattr(self, name) is not None}
        return Hyperparams(**kwargs)


def _merge_config(args, option_names):
    """Resolve a RunConfig from --config or from explicit flags, never both."""
    explicit = {name: getattr(args, name) for name in option_names
                if getattr(args, name, None) is not None}
    if args.config is not None:
        if explicit:
            raise ValidationError(
                "pass either --config or explicit flags, not both "
                f"(got flags: {sorted(explicit)})")
        with open(args.config, "r", encoding="utf-8") as handle:
            return RunConfig.from_json(handle.read())
    return RunConfig(**explicit)


# ---------------------------------------------------------------------------
# commands

def cmd_synth(args) -> int:
    params = {name: getattr(args, name) for name in SYNTH_DEFAULTS}
    source_x, source_y, target_x, target_y = make_shifted_pair(args.seed, **params)
    os.makedirs(args.out_dir, exist_ok=True)
    write_feature_csv(os.path.join(args.out_dir, "source.csv"), source_x, source_y)
    write_feature_csv(os.path.join(args.out_dir, "target.csv"), target_x,
                      target_y[:args.n3])
    return 0


_TRAIN_OPTIONS = _HP_FIELDS + ("normalize", "source", "target", "model", "trace")


def cmd_train(args) -> int:
    config = _merge_config(args, _TRAIN_OPTIONS)
    for name in ("source", "target", "model"):
        if getattr(config, name) is None:
            raise ValidationError(f"train needs --{name}")
    hp = config.hyperparams()
    source_x, source_y = read_feature_csv(config.source, require_all_labeled=True)
    target_x, target_y = read_feature_csv(config.target)

    scaler = None
    if config.normalize:
        scaler = FeatureScaler.fit(np.vstack([source_x, target_x]))
        source_x = scaler.apply(source_x)
        target_x = scaler.apply(target_x)

    pair = DatasetPair(source_x, source_y, target_x, target_y)
    validate(pair, hp)
    state, trace = fit(pair, hp)
    save_model(config.model, state, hp.resolved(pair.m), scaler)
    if config.trace is not None:
        payload = {
            "objective_after_subspace": trace.objective_after_subspace,
            "objective_after_classifier": trace.objective_after_classifier,
            "objective_after_weights": trace.objective_after_weights,
            "matching_term": trace.matching_term,
            "q_value": trace.q_value,
            "pi_min": trace.pi_min,
            "pi_max": trace.pi_max,
            "pi_mean": trace.pi_mean,
            "inner_steps": trace.inner_steps,
            "pi_step_objective": trace.pi_step_objective,
            "pi_step_objective_uniform": trace.pi_step_objective_uniform,
            "n_iters": trace.n_iters,
            "stop_reason": trace.stop_reason,
        }
        _atomic_write(config.trace, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_predict(args) -> int:
    state, _, scaler = load_model(args.model)
    features, _ = read_feature_csv(args.input)
    if features.shape[1] != state.m:
        raise ValidationError(
            f"input has {features.shape[1]} features, model expects {state.m}")
    if scaler is not None:
        features = scaler.apply(features)
    scores, labels = predict_target(state.varphi, features)
    lines = ["score,label"]
    lines.extend(f"{_f17(s)},{int(l)}" for s, l in zip(scores, labels))
    _atomic_write(args.output, "\n".join(lines) + "\n")
    return 0


_EVAL_OPTIONS = _HP_FIELDS + ("normalize", "source", "target", "report", "folds")


def _run_eval(config) -> dict:
    for name in ("source", "target"):
        if getattr(config, name) is None:
            raise ValidationError(f"eval needs --{name}")
    hp = config.hyperparams()
    source_x, source_y = read_feature_csv(config.source, require_all_labeled=True)
    target_x, target_y = read_feature_csv(config.target, require_all_labeled=True)
    report = run_cv(source_x, source_y, target_x, target_y, hp,
                    folds=config.folds if config.folds is not None else 10,
                    seed=hp.seed, normalize=bool(config.normalize))
    return {
        "fold_accuracies": report.fold_accuracies,
        "mean_accuracy": report.mean_accuracy,
        "std_accuracy": report.std_accuracy,
        "seed": report.seed,
        "folds": report.folds,
        "hyperparams": {name: getattr(hp, name) for name in _HP_FIELDS},
    }


def cmd_eval(args) -> int:
    config = _merge_config(args, _EVAL_OPTIONS)
    if config.report is None:
        raise ValidationError("eval needs --report")
    payload = _run_eval(config)
    _atomic_write(config.report, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_sweep(args) -> int:
    config = _merge_config(args, _EVAL_OPTIONS + ("param", "grid"))
    if config.report is None:
        raise ValidationError("sweep needs --report")
    if config.param not in ("c1", "c2", "c3"):
        raise ValidationError("sweep --param must be one of c1, c2, c3")
    if not config.grid:
        raise ValidationError("sweep needs a nonempty --grid")
    rows = []
    for value in config.grid:
        point = RunConfig(**{**asdict(config), config.param: float(value),
                             "report": None, "param": None, "grid": None})
        result = _run_eval(point)
        rows.append({
            "value": float(value),
            "mean_accuracy": result["mean_accuracy"],
            "std_accuracy": result["std_accuracy"],
            "c1": result["hyperparams"]["c1"],
            "c2": result["hyperparams"]["c2"],
            "c3": result["hyperparams"]["c3"],
        })
    payload = {"param": config.param,
               "grid": [float(v) for v in config.grid],
               "rows": rows}
    _atomic_write(config.report, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _add_hyper_flags(parser):
    parser.add_argument("--config", help="JSON config file (exclusive with flags)")
    parser.add_argument("--c1", type=float, dest="c1")
    parser.add_argument("--c2", type=float, dest="c2")
    parser.add_argument("--c3", type=float, dest="c3")
    parser.add_argument("--subspace-dim", type=int, dest="r")
    parser.add_argument("--neighbors", type=int, dest="k")
    parser.add_argument("--delta", type=float, dest="delta")
    parser.add_argument("--step", type=float, dest="step")
    parser.add_argument("--loss", choices=LOSS_KINDS, dest="loss")
    parser.add_argument("--max-iters", type=int, dest="max_outer_iters")
    parser.add_argument("--max-inner-iters", type=int, dest="max_inner_iters")
    parser.add_argument("--tol", type=float, dest="tol")
    parser.add_argument("--seed", type=int, dest="seed")
    parser.add_argument("--normalize", action="store_const", const=True,
                        dest="normalize")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subadapt",
        description="Shared-subspace transfer learning with weighted source points")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic domain pair")
    p_synth.add_argument("--seed", type=int, default=0)
    for name, default in SYNTH_DEFAULTS.items():
        flag = "--" + name.replace("_", "-")
        p_synth.add_argument(flag, type=type(default), default=default, dest=name)
    p_synth.add_argument("--out-dir", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="train a model from two CSV files")
    _add_hyper_flags(p_train)
    p_train.add_argument("--source", dest="source")
    p_train.add_argument("--target", dest="target")
    p_train.add_argument("--model", dest="model")
    p_train.add_argument("--trace", dest="trace")
    p_train.set_defaults(func=cmd_train)

    p_pred = sub.add_parser("predict", help="score rows with a trained model")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--input", required=True)
    p_pred.add_argument("--output", required=True)
    p_pred.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("eval", help="cross-validate on a labeled target set")
    _add_hyper_flags(p_eval)
    p_eval.add_argument("--source", dest="source")
    p_eval.add_argument("--target", dest="target")
    p_eval.add_argument("--folds", type=int, dest="folds")
    p_eval.add_argument("--report", dest="report")
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="cross-validate over a weight grid")
    _add_hyper_flags(p_sweep)
    p_sweep.add_argument("--source", dest="source")
    p_sweep.add_argument("--target", dest="target")
    p_sweep.add_argument("--folds", type=int, dest="folds")
    p_sweep.add_argument("--report", dest="report")
    p_sweep.add_argument("--param", dest="param")
    p_sweep.add_argument("--grid", dest="grid",
                         type=lambda s: [float(v) for v in s.split(",") if v.strip()])
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NumericError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 3


def entry_point():
    raise SystemExit(main())


if __name__ == "__main__":
    entry_point()
