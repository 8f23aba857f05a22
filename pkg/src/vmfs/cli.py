"""``vmfs`` command line: ingest, synth, select, cluster, compare.

Exit status: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from vmfs.errors import VmfsError
from vmfs.pipeline import (
    Ranking,
    RunConfig,
    cluster_vms,
    render_report,
    run_comparison,
    select_features,
)
from vmfs.selectors import Method
from vmfs.synthgen import DEFAULT_COMPOSITION, DEFAULT_SEED, SynthConfig, composition_for, generate
from vmfs.telemetry import (
    Resource,
    Workload,
    attach_labels,
    filter_by_resource,
    label_sidecar,
    load_dataset,
    parse_esxtop_csv,
    parse_label_sidecar,
    save_dataset,
    write_esxtop_csv,
)

log = logging.getLogger("vmfs")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

_RESOURCE_ALIASES = {
    "cpu": Resource.CPU, "mem": Resource.MEMORY, "memory": Resource.MEMORY,
    "disk": Resource.DISK, "net": Resource.NETWORK, "network": Resource.NETWORK,
    "power": Resource.POWER,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resources(text: str | None):
    if not text:
        return None
    out = set()
    for part in text.split(","):
        key = part.strip().lower()
        if key not in _RESOURCE_ALIASES:
            raise UsageError(f"unknown resource {part!r}")
        out.add(_RESOURCE_ALIASES[key])
    return out


def _composition(text: str) -> dict[Workload, int]:
    out = {}
    for part in text.split(","):
        key, sep, val = part.partition("=")
        if not sep:
            raise UsageError(f"bad composition entry {part!r}; expected name=count")
        try:
            out[Workload(key.strip().lower())] = int(val)
        except ValueError:
            raise UsageError(f"bad composition entry {part!r}") from None
    return out


def _methods(text: str) -> tuple[Method, ...]:
    if text.strip().lower() == "all":
        return tuple(Method)
    try:
        return tuple(Method(m.strip().upper()) for m in text.split(","))
    except ValueError:
        raise UsageError(f"unknown method in {text!r}") from None


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _add_selector_options(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cfs-denominator", choices=["standard", "paper"], default="standard")
    p.add_argument("--cfs-bins", type=int, default=10)
    p.add_argument("--relief-m", default="all", help="instances to sample, or 'all'")
    p.add_argument("--relief-threshold", type=float, default=0.0)
    p.add_argument("--relief-top-k", type=int)
    p.add_argument("--chi-critical", type=float, default=3.841)
    p.add_argument("--chi-top-k", type=int)
    p.add_argument("--wrapper-mode", choices=["greedy", "exhaustive"], default="greedy")
    p.add_argument("--usqr-bins", type=int, default=5)


def _config(args, **extra) -> RunConfig:
    relief_m = args.relief_m if args.relief_m == "all" else int(args.relief_m)
    return RunConfig(
        seed=args.seed,
        cfs_denominator=args.cfs_denominator,
        cfs_bins=args.cfs_bins,
        relief_m=relief_m,
        relief_threshold=args.relief_threshold,
        relief_top_k=args.relief_top_k,
        chi_critical=args.chi_critical,
        chi_top_k=args.chi_top_k,
        wrapper_mode=args.wrapper_mode,
        usqr_bins=args.usqr_bins,
        **extra,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vmfs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="esxtop CSV + label sidecar -> dataset JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--labels")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic dataset")
    p.add_argument("--vms", type=int)
    p.add_argument("--composition")
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--samples", type=int, default=60)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--resources")
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also write the esxtop CSV dialect here")
    p.add_argument("--labels-out", help="also write the label sidecar here")

    p = sub.add_parser("select", help="run one feature selector")
    p.add_argument("--method", required=True, choices=[m.value.lower() for m in Method])
    p.add_argument("--dataset", required=True)
    p.add_argument("--resources")
    p.add_argument("--out")
    _add_selector_options(p)

    p = sub.add_parser("cluster", help="k-means over per-VM means of chosen features")
    p.add_argument("--dataset", required=True)
    p.add_argument("--features", required=True, help="comma-separated feature ids")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("compare", help="full selector comparison report")
    p.add_argument("--dataset", required=True)
    p.add_argument("--methods", default="all")
    p.add_argument("--ranking", choices=[r.value for r in Ranking], default="standard")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--resources")
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "markdown"], default="json")
    p.add_argument("--figures", help="directory for PNG figures")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--timings", action="store_true",
                   help="record wall time per selector (report is then not reproducible)")
    _add_selector_options(p)
    return parser


def cmd_ingest(args) -> None:
    ds = parse_esxtop_csv(Path(args.input).read_text(encoding="utf-8"))
    skipped = ds.diagnostics.get("skipped_count", 0)
    if skipped:
        log.warning("skipped %d unrecognized counter column(s)", skipped)
    if args.labels:
        ds = attach_labels(ds, parse_label_sidecar(Path(args.labels).read_text(encoding="utf-8")))
    save_dataset(ds, args.out)


def cmd_synth(args) -> None:
    if args.composition:
        counts = _composition(args.composition)
        if args.vms is not None and args.vms != sum(counts.values()):
            raise UsageError(f"--vms {args.vms} disagrees with composition total "
                             f"{sum(counts.values())}")
    elif args.vms is not None and args.vms != sum(DEFAULT_COMPOSITION.values()):
        counts = composition_for(args.vms)
    else:
        counts = dict(DEFAULT_COMPOSITION)
    resources = _resources(args.resources) or set(Resource)
    try:
        cfg = SynthConfig(vm_counts=counts, samples_per_vm=args.samples, seed=args.seed,
                          separation=args.separation, resources=frozenset(resources))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ds = generate(cfg)
    save_dataset(ds, args.out)
    if args.csv:
        Path(args.csv).write_text(write_esxtop_csv(ds), encoding="utf-8")
    if args.labels_out:
        Path(args.labels_out).write_text(json.dumps(label_sidecar(ds), indent=2) + "\n",
                                         encoding="utf-8")


def cmd_select(args) -> None:
    ds = load_dataset(args.dataset)
    res = _resources(args.resources)
    if res:
        ds = filter_by_resource(ds, res)
    subset = select_features(ds, Method(args.method.upper()), _config(args))
    _write(json.dumps(subset.to_dict(), indent=2) + "\n", args.out)


def cmd_cluster(args) -> None:
    ds = load_dataset(args.dataset)
    features = [f.strip() for f in args.features.split(",") if f.strip()]
    try:
        names, _, assignment = cluster_vms(ds, features, args.k, args.seed)
    except KeyError as exc:
        raise UsageError(f"unknown feature {exc.args[0]!r}") from None
    payload = assignment.to_dict()
    payload["vms"] = list(names)
    _write(json.dumps(payload, indent=2) + "\n", args.out)


def cmd_compare(args) -> None:
    ds = load_dataset(args.dataset)
    try:
        cfg = _config(args, selectors=_methods(args.methods), k=args.k,
                      ranking=Ranking(args.ranking), resources=_resources(args.resources),
                      jobs=args.jobs, timings=args.timings)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = run_comparison(ds, cfg)
    _write(render_report(report, args.format), args.out)
    if args.figures:
        from vmfs.plots import render_figures

        for path in render_figures(report, args.figures):
            log.info("wrote %s", path)


COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "select": cmd_select,
    "cluster": cmd_cluster,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"vmfs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (VmfsError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"vmfs {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
