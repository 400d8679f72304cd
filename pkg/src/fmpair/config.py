"""Experiment configuration files.

A config is sectioned ``key = value`` text read with :mod:`configparser`
(``#`` and ``;`` start comments, no interpolation). Sections:

``[dataset]``
    path, columns, delimiter (``tab`` for a tab), header, encoding,
    context (columns kept as raw context), implicit, densify.
``[split]``
    folds, seed.
``[model]``
    method, k, epochs, learn_rate, reg_w0, reg_w, reg_v, sigma0, seed,
    item_bias, negative_label, resample_negatives.
``[features]``
    context (dimension names), normalize, and per-dimension
    ``bins.<name>`` (edges) and ``weight.<name>``.
``[item_attributes]``
    path, delimiter, encoding, header, item_column, dimension, normalize,
    and either flag_columns plus flag_names (one-hot columns) or value_columns.
``[cross_domain]``
    target, sources, scheme, max_features, seed.
``[eval]``
    n, pool, seed, exclude (``train`` or ``all``), track_every, track_n.

Relative paths resolve against the config file's directory. A ``[run]``
section is accepted and ignored so written manifests can be re-run as is.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .data import FormatDescriptor
from .errors import ConfigError, DescriptorError, DomainError, SchemaError
from .features import ContextDimension, ContextSchema, CrossDomainConfig
from .pairwise import TrainConfig

METHODS = (
    "fm-pair",
    "fm-pair-context",
    "fm-pair-cd",
    "fm-pair-all",
    "fm-map",
    "bpr-mf",
    "most-popular",
    "fm-explicit",
)
PAIRWISE = ("fm-pair", "fm-pair-context", "fm-pair-cd", "fm-pair-all")
SECTIONS = ("dataset", "split", "model", "features", "item_attributes", "cross_domain", "eval", "run")


def _bool(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _list(text):
    return [p.strip() for p in text.split(",") if p.strip()]


def _ints(text):
    return [int(p) for p in _list(text)]


def _floats(text):
    return [float(p) for p in _list(text)]


def _columns(text):
    """Column indices: ``5-23`` ranges and comma lists."""
    out = []
    for part in _list(text):
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


class _Section:
    """Typed access to one section; every key read is recorded, leftovers are errors."""

    def __init__(self, parser, name):
        self.name = name
        self.items = dict(parser[name]) if parser.has_section(name) else {}
        self.used = set()

    def __contains__(self, key):
        return key in self.items

    def get(self, key, conv=str, default=None, required=False):
        self.used.add(key)
        if key not in self.items or self.items[key].strip() == "":
            if required:
                raise ConfigError(f"{self.name}.{key}", "required")
            return default
        try:
            return conv(self.items[key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{self.name}.{key}", str(exc)) from None

    def prefixed(self, prefix):
        for key in self.items:
            if key.startswith(prefix):
                self.used.add(key)
                yield key[len(prefix) :], key

    def finish(self):
        extra = sorted(set(self.items) - self.used)
        if extra:
            raise ConfigError(f"{self.name}.{extra[0]}", "unknown key")


@dataclass
class AttributeTable:
    path: Path
    item_column: int = 0
    dimension: str = "attr"
    delimiter: str = ","
    encoding: str = "utf-8"
    header: bool = False
    flag_columns: list[int] = field(default_factory=list)
    flag_names: list[str] = field(default_factory=list)
    value_columns: list[int] = field(default_factory=list)
    normalize: bool = False


@dataclass
class ExperimentConfig:
    path: Path
    descriptor: FormatDescriptor
    method: str
    train: TrainConfig
    implicit: bool = True
    densify: int = 0
    folds: int = 4
    split_seed: int = 0
    negative_label: float = -1.0
    resample_negatives: bool = False
    context: ContextSchema | None = None
    attributes: AttributeTable | None = None
    cross_domain: CrossDomainConfig | None = None
    ns: list[int] = field(default_factory=lambda: [10])
    pool: int = 1000
    eval_seed: int = 0
    exclude: str = "train"
    track_every: int = 0
    track_n: int = 10
    source: Path | None = None

    def input_files(self) -> list[Path]:
        files = [self.path]
        if self.attributes is not None:
            files.append(self.attributes.path)
        return files

    def to_ini(self) -> str:
        """Fully resolved config (absolute paths, every key explicit)."""
        d = self.descriptor
        t = self.train
        lines = ["[dataset]", f"path = {self.path}"]
        if d.columns is not None:
            lines.append(f"columns = {', '.join(d.columns)}")
        delim = "tab" if d.delimiter == "\t" else d.delimiter
        lines += [
            f"delimiter = {delim}",
            f"header = {str(d.header).lower()}",
            f"encoding = {d.encoding}",
            f"context = {', '.join(d.context)}",
            f"implicit = {str(self.implicit).lower()}",
            f"densify = {self.densify}",
            "",
            "[split]",
            f"folds = {self.folds}",
            f"seed = {self.split_seed}",
            "",
            "[model]",
            f"method = {self.method}",
            f"k = {t.k}",
            f"epochs = {t.epochs}",
            f"learn_rate = {t.learn_rate!r}",
            f"reg_w0 = {t.reg_w0!r}",
            f"reg_w = {t.reg_w!r}",
            f"reg_v = {t.reg_v!r}",
            f"sigma0 = {t.sigma0!r}",
            f"seed = {t.seed}",
            f"item_bias = {str(t.item_bias_enabled).lower()}",
            f"negative_label = {self.negative_label!r}",
            f"resample_negatives = {str(self.resample_negatives).lower()}",
        ]
        if self.context is not None:
            lines += ["", "[features]", f"context = {', '.join(dim.name for dim in self.context.dimensions)}"]
            lines.append(f"normalize = {str(self.context.normalize).lower()}")
            for dim in self.context.dimensions:
                if dim.kind == "binned":
                    lines.append(f"bins.{dim.name} = {', '.join(repr(float(b)) for b in dim.bins)}")
                if dim.weight != 1.0:
                    lines.append(f"weight.{dim.name} = {dim.weight!r}")
        if self.attributes is not None:
            a = self.attributes
            lines += [
                "",
                "[item_attributes]",
                f"path = {a.path}",
                f"delimiter = {'tab' if a.delimiter == chr(9) else a.delimiter}",
                f"encoding = {a.encoding}",
                f"header = {str(a.header).lower()}",
                f"item_column = {a.item_column}",
                f"dimension = {a.dimension}",
                f"normalize = {str(a.normalize).lower()}",
            ]
            if a.flag_columns:
                lines.append(f"flag_columns = {', '.join(map(str, a.flag_columns))}")
                lines.append(f"flag_names = {', '.join(a.flag_names)}")
            if a.value_columns:
                lines.append(f"value_columns = {', '.join(map(str, a.value_columns))}")
        if self.cross_domain is not None:
            c = self.cross_domain
            lines += [
                "",
                "[cross_domain]",
                f"target = {c.target}",
                f"sources = {', '.join(c.sources)}",
                f"scheme = {c.scheme}",
                f"max_features = {c.max_features}",
                f"seed = {c.seed}",
            ]
        lines += [
            "",
            "[eval]",
            f"n = {', '.join(map(str, self.ns))}",
            f"pool = {self.pool}",
            f"seed = {self.eval_seed}",
            f"exclude = {self.exclude}",
            f"track_every = {self.track_every}",
            f"track_n = {self.track_n}",
        ]
        return "\n".join(lines) + "\n"


def _path(base: Path, text: str) -> Path:
    p = Path(text).expanduser()
    return p if p.is_absolute() else (base / p).resolve()


def parse_config(text: str, base: Path | str = ".", source: Path | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), comment_prefixes=("#", ";"), empty_lines_in_values=False
    )
    parser.optionxform = str  # keep dimension names in bins.<name> case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(name, "unknown section")
    base = Path(base)

    ds = _Section(parser, "dataset")
    if not parser.has_section("dataset"):
        raise ConfigError("dataset", "section missing")
    path = _path(base, ds.get("path", required=True))
    columns = ds.get("columns", _list)
    try:
        descriptor = FormatDescriptor(
            columns=tuple(columns) if columns else None,
            delimiter=ds.get("delimiter", default=","),
            header=ds.get("header", _bool, False),
            context=tuple(ds.get("context", _list, [])),
            encoding=ds.get("encoding", default="utf-8"),
        )
    except DescriptorError as exc:
        raise ConfigError("dataset.columns", str(exc)) from None
    implicit = ds.get("implicit", _bool, True)
    densify = ds.get("densify", int, 0)
    if densify < 0:
        raise ConfigError("dataset.densify", "must be >= 0")
    ds.finish()

    sp = _Section(parser, "split")
    folds = sp.get("folds", int, 4)
    if folds < 2:
        raise ConfigError("split.folds", "must be >= 2")
    split_seed = sp.get("seed", int, 0)
    sp.finish()

    md = _Section(parser, "model")
    method = md.get("method", required=True)
    if method not in METHODS:
        raise ConfigError("model.method", f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    defaults = TrainConfig()
    values = {}
    for key, conv in (
        ("k", int), ("epochs", int), ("learn_rate", float), ("reg_w0", float), ("reg_w", float),
        ("reg_v", float), ("sigma0", float), ("seed", int),
    ):
        values[key] = md.get(key, conv, getattr(defaults, key))
    # BPR-MF has no bias terms; the flag only records that
    values["item_bias_enabled"] = md.get("item_bias", _bool, method != "bpr-mf")
    try:
        train = TrainConfig(**values)
    except DomainError as exc:
        key = str(exc).split()[0]
        raise ConfigError(f"model.{key}", str(exc)) from None
    negative_label = md.get("negative_label", float, -1.0)
    resample = md.get("resample_negatives", _bool, False)
    md.finish()

    ft = _Section(parser, "features")
    context = None
    names = ft.get("context", _list, [])
    normalize = ft.get("normalize", _bool, False)
    bins = {name: key for name, key in ft.prefixed("bins.")}
    weights = {name: key for name, key in ft.prefixed("weight.")}
    for name, key in list(bins.items()) + list(weights.items()):
        if name not in names:
            raise ConfigError(f"features.{key}", f"dimension {name!r} is not listed in features.context")
    if names:
        dims = []
        for name in names:
            if name not in descriptor.context:
                raise ConfigError("features.context", f"dimension {name!r} is not a dataset.context column")
            kw = {}
            if name in bins:
                kw = {"kind": "binned", "bins": ft.get(bins[name], _floats)}
            if name in weights:
                kw["weight"] = ft.get(weights[name], float)
            try:
                dims.append(ContextDimension(name, **kw))
            except SchemaError as exc:
                raise ConfigError(f"features.{bins.get(name, 'context')}", str(exc)) from None
        context = ContextSchema(dims, normalize)
    ft.finish()

    at = _Section(parser, "item_attributes")
    attributes = None
    if parser.has_section("item_attributes"):
        attributes = AttributeTable(
            path=_path(base, at.get("path", required=True)),
            item_column=at.get("item_column", int, 0),
            dimension=at.get("dimension", default="attr"),
            delimiter=at.get("delimiter", default=","),
            encoding=at.get("encoding", default="utf-8"),
            header=at.get("header", _bool, False),
            flag_columns=at.get("flag_columns", _columns, []),
            flag_names=at.get("flag_names", _list, []),
            value_columns=at.get("value_columns", _columns, []),
            normalize=at.get("normalize", _bool, False),
        )
        if attributes.delimiter in ("tab", "\\t"):
            attributes.delimiter = "\t"
        if not attributes.flag_columns and not attributes.value_columns:
            raise ConfigError("item_attributes.flag_columns", "give flag_columns or value_columns")
        if attributes.flag_names and len(attributes.flag_names) != len(attributes.flag_columns):
            raise ConfigError(
                "item_attributes.flag_names",
                f"{len(attributes.flag_names)} names for {len(attributes.flag_columns)} flag columns",
            )
        if context is not None and attributes.dimension in names:
            raise ConfigError("item_attributes.dimension", f"{attributes.dimension!r} is also a context dimension")
    at.finish()

    cd = _Section(parser, "cross_domain")
    cross = None
    if parser.has_section("cross_domain"):
        try:
            cross = CrossDomainConfig(
                target=cd.get("target", required=True),
                sources=tuple(cd.get("sources", _list, [])),
                scheme=cd.get("scheme", default="count"),
                max_features=cd.get("max_features", int, 5),
                seed=cd.get("seed", int, 0),
            )
        except DomainError as exc:
            raise ConfigError("cross_domain", str(exc)) from None
    cd.finish()

    ev = _Section(parser, "eval")
    ns = ev.get("n", _ints, [10])
    if not ns or min(ns) < 1:
        raise ConfigError("eval.n", "need one or more positive cutoffs")
    pool = ev.get("pool", int, 1000)
    if pool < 1:
        raise ConfigError("eval.pool", "must be >= 1")
    eval_seed = ev.get("seed", int, 0)
    exclude = ev.get("exclude", default="train")
    if exclude not in ("train", "all"):
        raise ConfigError("eval.exclude", f"expected 'train' or 'all', got {exclude!r}")
    track_every = ev.get("track_every", int, 0)
    track_n = ev.get("track_n", int, 10)
    if track_every < 0 or track_n < 1:
        raise ConfigError("eval.track_every", "track_every must be >= 0 and track_n >= 1")
    ev.finish()

    # method-specific requirements
    cols = descriptor.columns
    if method in ("fm-pair-cd", "fm-pair-all") and cross is None:
        raise ConfigError("cross_domain", f"method {method} needs a [cross_domain] section")
    if cross is not None and cols is not None and "domain" not in cols:
        raise ConfigError("dataset.columns", "a [cross_domain] run needs a domain column")
    if method == "fm-pair-context" and context is None and attributes is None:
        raise ConfigError("features.context", "fm-pair-context needs [features] context or [item_attributes]")
    if (implicit or method == "fm-explicit") and cols is not None and "rating" not in cols:
        field_name = "dataset.implicit" if implicit else "dataset.columns"
        raise ConfigError(field_name, "a rating column is required")
    if method == "fm-map" and negative_label >= 1.0:
        raise ConfigError("model.negative_label", "must be below the positive label 1")

    return ExperimentConfig(
        path=path, descriptor=descriptor, method=method, train=train, implicit=implicit, densify=densify,
        folds=folds, split_seed=split_seed, negative_label=negative_label, resample_negatives=resample,
        context=context, attributes=attributes, cross_domain=cross, ns=ns, pool=pool, eval_seed=eval_seed,
        exclude=exclude, track_every=track_every, track_n=track_n, source=source,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, path.resolve().parent, path)
