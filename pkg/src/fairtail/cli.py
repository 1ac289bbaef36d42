"""Command-line front end.

Subcommands::

    fairtail audit  --input plays.tsv [--provider-map items.tsv] --algorithms userknn,nmf,mostpop
    fairtail stats  --input plays.tsv
    fairtail groups --input plays.tsv --beta1 0.3 --beta2 0.7
    fairtail synth  --users 1000 --items 2000 --events 100 --exponent 1.1 --seed 42

Settings resolve as built-in defaults < ``--config`` file < flags. The config
file holds ``key = value`` lines (``#`` comments, comma-separated lists); keys
are flag names with or without the leading dashes.

Exit status: 0 success, 1 usage or invalid settings, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

from fairtail.dataset import (
    ScalingScheme,
    build_matrix,
    format_interactions,
    generate_synthetic,
    load_provider_map,
    read_interactions,
)
from fairtail.errors import ConfigError, DataError
from fairtail.fairness import ALL_ALGORITHMS, AuditConfig, audit
from fairtail.popularity import (
    DEFAULT_BOUNDARIES,
    compute_popularity,
    partition_long_tail,
    popularity_rows,
    validate_boundaries,
)
from fairtail.recommenders import Algorithm

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
OUTPUT_DIR_ENV = "FAIRTAIL_OUTPUT_DIR"

DEFAULTS = {
    "algorithms": ",".join(a.value.lower() for a in ALL_ALGORITHMS),
    "n": 10,
    "k": 40,
    "factors": 15,
    "epochs": 50,
    "reg": 0.06,
    "scaling": "raw",
    "beta1": DEFAULT_BOUNDARIES[0],
    "beta2": DEFAULT_BOUNDARIES[1],
    "seed": 0,
    "exclude_seen": "true",
    "threads": 1,
    "users": None,
    "items": None,
    "events": None,
    "exponent": 1.0,
}


class UsageError(Exception):
    pass


class DataFileError(Exception):
    """Data problem with file context, reported with exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise UsageError(f"expected true or false, got {value!r}")


def read_config_file(path: Path) -> dict[str, str]:
    """Parse flat ``key = value`` lines. Keys are normalized to snake_case."""
    out = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFileError(f"{path}: cannot read config: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise DataFileError(f"{path}: line {lineno}: expected 'key = value'")
        out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _common(p: argparse.ArgumentParser, input_required=True):
    p.add_argument("--input", required=input_required, type=Path, help="interactions TSV (user, item, count)")
    p.add_argument("--provider-map", type=Path, help="TSV mapping item -> provider")
    p.add_argument("--identity-providers", action="store_true", default=None, help="treat every item as its own provider")
    p.add_argument("--output-dir", type=Path, help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    p.add_argument("--config", type=Path, help="key = value settings file")
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairtail", description="Audit provider-side popularity bias of recommenders.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("audit", help="fit recommenders and report GAP / delta GAP per provider group")
    _common(p)
    p.add_argument("--algorithms", help="comma-separated: userknn,nmf,useritemavg,mostpop,random")
    p.add_argument("--n", type=int, help="recommendation list length")
    p.add_argument("--k", type=int, help="UserKNN neighborhood size")
    p.add_argument("--factors", type=int, help="NMF latent dimension")
    p.add_argument("--epochs", type=int, help="NMF training passes")
    p.add_argument("--reg", type=float, help="NMF regularization weight")
    p.add_argument("--scaling", choices=[s.value for s in ScalingScheme])
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--exclude-seen", choices=["true", "false"])
    p.add_argument("--threads", type=int, help="worker threads for recommendation")
    p.add_argument("--save-recommendations", action="store_true", default=None,
                   help="also write recommendations_<algorithm>.tsv")

    p = sub.add_parser("stats", help="write provider popularity ranking (popularity.csv)")
    _common(p)

    p = sub.add_parser("groups", help="write High-P / Mid-P / Low-P membership (groups.csv)")
    _common(p)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)

    p = sub.add_parser("synth", help="write a synthetic Zipf interactions TSV")
    _common(p, input_required=False)
    p.add_argument("--users", type=int)
    p.add_argument("--items", type=int)
    p.add_argument("--events", type=int, help="events per user")
    p.add_argument("--exponent", type=float, help="Zipf exponent")
    p.add_argument("--output", help="file name inside the output directory (default interactions.tsv)")
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    if args.config is not None:
        settings.update(read_config_file(args.config))
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config", "verbose"):
            settings[key] = value
    return settings


def _typed(settings: dict, key: str, kind):
    value = settings.get(key)
    if value is None:
        raise UsageError(f"missing required setting: {key}")
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise UsageError(f"invalid value for {key}: {value!r}") from None


def output_dir(settings: dict) -> Path:
    path = settings.get("output_dir") or os.environ.get(OUTPUT_DIR_ENV) or "."
    return Path(path)


def write_atomic(outputs: dict[Path, str]):
    """Write every file via a temporary sibling and rename into place."""
    staged = []
    try:
        for path, text in outputs.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _load(settings: dict):
    path = Path(settings["input"])
    try:
        records = read_interactions(path)
        matrix = build_matrix(records)
    except OSError as exc:
        raise DataFileError(f"{path}: cannot read: {exc.strerror or exc}") from None
    except DataError as exc:
        raise DataFileError(f"{path}: {exc}") from None

    map_path = settings.get("provider_map")
    identity = _bool(settings.get("identity_providers", False))
    if map_path and identity:
        raise UsageError("--provider-map and --identity-providers are mutually exclusive")
    if not map_path:
        return matrix, load_provider_map(None, matrix, identity=True), "identity"
    map_path = Path(map_path)
    try:
        text = map_path.read_text(encoding="utf-8")
        return matrix, load_provider_map(text, matrix), "map"
    except OSError as exc:
        raise DataFileError(f"{map_path}: cannot read: {exc.strerror or exc}") from None
    except DataError as exc:
        raise DataFileError(f"{map_path}: {exc}") from None


def _boundaries(settings) -> tuple[float, float]:
    return validate_boundaries((_typed(settings, "beta1", float), _typed(settings, "beta2", float)))


def run_audit(settings: dict) -> int:
    algorithms = [a for a in str(settings["algorithms"]).split(",") if a.strip()]
    config = AuditConfig.build(
        [Algorithm.parse(a) for a in algorithms],
        seed=_typed(settings, "seed", int),
        n=_typed(settings, "n", int),
        k=_typed(settings, "k", int),
        factors=_typed(settings, "factors", int),
        epochs=_typed(settings, "epochs", int),
        reg=_typed(settings, "reg", float),
        exclude_seen=_bool(settings["exclude_seen"]),
        boundaries=_boundaries(settings),
        scaling=settings["scaling"],
    )
    threads = _typed(settings, "threads", int)
    if threads < 1:
        raise UsageError("threads must be >= 1")
    out = output_dir(settings)
    matrix, pmap, mode = _load(settings)
    config = AuditConfig(config.recommenders, config.boundaries, config.scaling, mode, config.seed, config.n)
    try:
        report = audit(matrix, pmap, config, workers=threads)
    except DataError as exc:
        raise DataFileError(f"{settings['input']}: {exc}") from None

    outputs = {out / "report.csv": report.to_csv(), out / "report.json": report.to_json()}
    if _bool(settings.get("save_recommendations", False)):
        for name, recs in report.recommendations.items():
            outputs[out / f"recommendations_{name.lower()}.tsv"] = recs.to_tsv()
    write_atomic(outputs)
    print(report.summary())
    return EXIT_OK


def run_stats(settings: dict) -> int:
    out = output_dir(settings)
    matrix, pmap, _ = _load(settings)
    table = compute_popularity(matrix, pmap)
    lines = ["rank,provider,count,share,cumulative_share\n"]
    for rank, provider, count, share, cum in popularity_rows(table, pmap.providers):
        lines.append(f"{rank},{_csv_field(provider)},{count},{share!r},{cum!r}\n")
    write_atomic({out / "popularity.csv": "".join(lines)})
    print(f"{len(table)} providers, {table.total} events -> {out / 'popularity.csv'}")
    return EXIT_OK


def run_groups(settings: dict) -> int:
    boundaries = _boundaries(settings)
    out = output_dir(settings)
    matrix, pmap, _ = _load(settings)
    table = compute_popularity(matrix, pmap)
    try:
        partition = partition_long_tail(table, boundaries)
    except DataError as exc:
        raise DataFileError(f"{settings['input']}: {exc}") from None
    labels = partition.labels(len(table))
    lines = ["provider,group\n"]
    for p in table.descending_order().tolist():
        lines.append(f"{_csv_field(pmap.providers[p])},{labels[p]}\n")
    write_atomic({out / "groups.csv": "".join(lines)})
    shares = table.shares
    for name, members in partition.groups().items():
        print(f"{name}\t{members.size}\t{shares[members].sum():.6f}")
    return EXIT_OK


def run_synth(settings: dict) -> int:
    users = _typed(settings, "users", int)
    items = _typed(settings, "items", int)
    events = _typed(settings, "events", int)
    exponent = _typed(settings, "exponent", float)
    seed = _typed(settings, "seed", int)
    records = generate_synthetic(users, items, events, exponent, seed)
    path = output_dir(settings) / (settings.get("output") or "interactions.tsv")
    write_atomic({path: format_interactions(records)})
    print(f"{len(records)} records -> {path}")
    return EXIT_OK


def _csv_field(value: str) -> str:
    if any(c in value for c in ',"\n\r'):
        return '"' + value.replace('"', '""') + '"'
    return value


COMMANDS = {"audit": run_audit, "stats": run_stats, "groups": run_groups, "synth": run_synth}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = resolve_settings(args)
        return COMMANDS[args.command](settings)
    except (UsageError, ConfigError) as exc:
        print(f"fairtail {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFileError, DataError) as exc:
        print(f"fairtail {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
