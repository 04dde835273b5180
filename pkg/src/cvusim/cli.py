"""Command-line entry point: dse, simulate, and compare experiments.

Every command writes a CSV report whose header embeds the run manifest
(resolved parameters, input digests, tool version, seed).  Identical
manifests produce byte-identical output; nothing in a report depends on
time, locale, or environment.

Exit codes: 0 success, 1 usage error, 2 input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .arch import (
    DDR4,
    HBM2,
    AcceleratorConfig,
    MemorySpec,
    SimReport,
    Style,
    build_array,
    compare,
    simulate_network,
)
from .cost import default_params, dse_sweep, load_params
from .errors import ConfigError, NetworkFormatError
from .workloads import NetworkSpec, bundled_networks, load_network, to_homogeneous

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3

_STYLES = {
    "conventional": Style.CONVENTIONAL,
    "scalar": Style.SCALAR,
    "vector": Style.VECTOR,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are exit 1
        raise _UsageError(message)


@dataclass(frozen=True)
class RunManifest:
    command: str
    parameters: dict
    input_digests: dict
    version: str = __version__
    seed: int = 0  # reserved; all commands are deterministic

    def canonical_json(self) -> str:
        doc = {
            "command": self.command,
            "parameters": self.parameters,
            "input_digests": self.input_digests,
            "version": self.version,
            "seed": self.seed,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def _digest_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _emit(manifest: RunManifest, header: list[str], rows: list[list], out: str | None) -> None:
    lines = [
        f"# cvusim {manifest.command} report",
        f"# manifest: {manifest.canonical_json()}",
        f"# manifest-digest: {manifest.digest}",
        ",".join(header),
    ]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"manifest-digest: {manifest.digest}", file=sys.stderr)


def _load_cost_params(args) -> tuple:
    if args.params:
        path = Path(args.params)
        if not path.is_file():
            raise FileNotFoundError(f"cost params file not found: {path}")
        return load_params(path), {"params": _digest_file(path)}
    return default_params(), {"params": "default"}


def _resolve_network(name_or_path: str) -> tuple[NetworkSpec, Path]:
    bundled = bundled_networks()
    if name_or_path in bundled:
        path = bundled[name_or_path]
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise FileNotFoundError(
                f"network {name_or_path!r} is neither a file nor a bundled benchmark "
                f"(bundled: {', '.join(sorted(bundled))})"
            )
    return load_network(path), path


def _memory_from_args(args) -> MemorySpec:
    if args.memory == "ddr4":
        return DDR4
    if args.memory == "hbm2":
        return HBM2
    if args.bandwidth is None or args.pj_per_bit is None:
        raise _UsageError("--memory custom requires --bandwidth and --pj-per-bit")
    return MemorySpec("custom", args.bandwidth * 1e9, args.pj_per_bit)


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def cmd_dse(args) -> int:
    params, digests = _load_cost_params(args)
    points = dse_sweep(args.slices, args.lanes, params)
    manifest = RunManifest(
        command="dse",
        parameters={"slices": sorted(set(args.slices)), "lanes": sorted(set(args.lanes))},
        input_digests=digests,
    )
    header = [
        "slice_width", "L", "power_norm", "area_norm",
        "mult_power", "add_power", "shift_power", "register_power",
        "mult_area", "add_area", "shift_area", "register_area",
    ]
    rows = [
        [
            p.slice_width, p.lanes, p.power_per_mac_norm, p.area_per_mac_norm,
            p.breakdown.multiply_energy, p.breakdown.add_energy,
            p.breakdown.shift_energy, p.breakdown.register_energy,
            p.breakdown.multiply_area, p.breakdown.add_area,
            p.breakdown.shift_area, p.breakdown.register_area,
        ]
        for p in points
    ]
    _emit(manifest, header, rows, args.out)
    return EXIT_OK


def _simulate_one(net: NetworkSpec, style: Style, mem: MemorySpec, args, params) -> tuple[SimReport, AcceleratorConfig]:
    acc = build_array(
        style,
        params,
        budget_mw=args.budget,
        total_sram_bytes=args.sram_bytes,
    )
    return simulate_network(net, acc, mem, params), acc


def cmd_simulate(args) -> int:
    params, digests = _load_cost_params(args)
    net, path = _resolve_network(args.network)
    digests["network"] = _digest_file(path)
    if args.bitwidths == "homogeneous":
        net = to_homogeneous(net)
    mem = _memory_from_args(args)
    report, acc = _simulate_one(net, _STYLES[args.style], mem, args, params)

    manifest = RunManifest(
        command="simulate",
        parameters={
            "network": net.name,
            "bitwidths": args.bitwidths,
            "style": args.style,
            "memory": mem.name,
            "bandwidth_gbps": mem.bandwidth_bytes_per_s / 1e9,
            "pj_per_bit": mem.access_energy_pj_per_bit,
            "budget_mw": args.budget,
            "sram_bytes": args.sram_bytes,
            "array": f"{acc.rows}x{acc.cols}",
        },
        input_digests=digests,
    )
    header = [
        "layer", "kind", "m", "k", "n", "repeats", "bw_x", "bw_w", "macs",
        "compute_cycles", "memory_cycles", "total_cycles", "bound", "utilization",
        "energy_compute_pj", "energy_sram_pj", "energy_offchip_pj", "offchip_bytes",
    ]
    rows = [
        [
            l.name, l.kind, l.m, l.k, l.n, l.repeats, l.bw_x, l.bw_w, l.macs,
            l.compute_cycles, l.memory_cycles, l.total_cycles, l.bound, l.utilization,
            l.energy_compute_pj, l.energy_sram_pj, l.energy_offchip_pj, l.offchip_bytes,
        ]
        for l in report.layers
    ]
    rows.append(
        [
            "TOTAL", "-", "-", "-", "-", "-", "-", "-", report.macs,
            report.compute_cycles, report.memory_cycles, report.total_cycles,
            "memory" if report.memory_cycles > report.compute_cycles else "compute",
            "-",
            report.energy_compute_pj, report.energy_sram_pj, report.energy_offchip_pj,
            sum(l.offchip_bytes for l in report.layers),
        ]
    )
    _emit(manifest, header, rows, args.out)

    bound_counts = {"compute": 0, "memory": 0}
    for l in report.layers:
        bound_counts[l.bound] += 1
    summary = [
        f"network {net.name}: {args.style} + {mem.name}, array {acc.rows}x{acc.cols} "
        f"({acc.mac_capacity} MAC/cycle)",
        f"  total cycles {report.total_cycles} "
        f"(compute {report.compute_cycles}, memory {report.memory_cycles}), "
        f"runtime {report.runtime_s(acc.frequency_hz):.6g} s",
        f"  energy {report.energy_total_pj:.6g} pJ "
        f"(compute {report.energy_compute_pj:.6g}, sram {report.energy_sram_pj:.6g}, "
        f"off-chip {report.energy_offchip_pj:.6g})",
        f"  layers: {bound_counts['compute']} compute-bound, {bound_counts['memory']} memory-bound",
    ]
    print("\n".join(summary), file=sys.stderr)
    return EXIT_OK


def _parse_config_group(text: str) -> tuple[Style, str]:
    parts = text.split(":")
    if len(parts) != 2 or parts[0] not in _STYLES or parts[1] not in ("ddr4", "hbm2"):
        raise _UsageError(
            f"--config must look like 'vector:ddr4' (styles: {', '.join(_STYLES)}; memories: ddr4, hbm2), got {text!r}"
        )
    return _STYLES[parts[0]], parts[1]


def cmd_compare(args) -> int:
    if len(args.config) < 2:
        raise _UsageError("compare needs at least 2 --config groups")
    params, digests = _load_cost_params(args)
    groups = [_parse_config_group(c) for c in args.config]

    nets = []
    for name in args.network:
        net, path = _resolve_network(name)
        digests[f"network:{net.name}"] = _digest_file(path)
        if args.bitwidths == "homogeneous":
            net = to_homogeneous(net)
        nets.append(net)

    configs = []
    for style, mem_name in groups:
        mem = DDR4 if mem_name == "ddr4" else HBM2
        acc = build_array(style, params, budget_mw=args.budget, total_sram_bytes=args.sram_bytes)
        configs.append((acc, mem))

    manifest = RunManifest(
        command="compare",
        parameters={
            "networks": [n.name for n in nets],
            "bitwidths": args.bitwidths,
            "configs": list(args.config),
            "budget_mw": args.budget,
            "sram_bytes": args.sram_bytes,
        },
        input_digests=digests,
    )

    header = ["network", "config", "runtime_s", "energy_pj", "speedup", "energy_reduction"]
    rows = []
    ratio_log = {label: [0.0, 0.0] for label in args.config}
    for net in nets:
        entries = compare(net, configs, params)
        for raw_label, entry in zip(args.config, entries):
            rows.append([net.name, raw_label, entry.runtime_s, entry.energy_pj, entry.speedup, entry.energy_reduction])
            ratio_log[raw_label][0] += math.log(entry.speedup)
            ratio_log[raw_label][1] += math.log(entry.energy_reduction)
    for raw_label in args.config:  # geometric mean across networks
        s = math.exp(ratio_log[raw_label][0] / len(nets))
        e = math.exp(ratio_log[raw_label][1] / len(nets))
        rows.append(["geomean", raw_label, "-", "-", s, e])
    _emit(manifest, header, rows, args.out)
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="cvusim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"cvusim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    dse = sub.add_parser("dse", help="design-space sweep over slice widths and lane counts")
    dse.add_argument("--slices", type=_int_list, default=[1, 2, 4])
    dse.add_argument("--lanes", type=_int_list, default=[1, 2, 4, 8, 16])
    dse.add_argument("--params", default=None, help="cost params JSON (default: shipped calibration)")
    dse.add_argument("--out", default=None, help="write CSV here instead of stdout")
    dse.set_defaults(func=cmd_dse)

    sim = sub.add_parser("simulate", help="simulate one network on one platform")
    sim.add_argument("--network", required=True, help="network file or bundled benchmark name")
    sim.add_argument("--style", choices=sorted(_STYLES), required=True)
    sim.add_argument("--memory", choices=["ddr4", "hbm2", "custom"], default="ddr4")
    sim.add_argument("--bandwidth", type=float, default=None, help="custom memory bandwidth, GB/s")
    sim.add_argument("--pj-per-bit", type=float, default=None, help="custom memory access energy")
    sim.add_argument("--budget", type=float, default=250.0, help="core power budget, mW")
    sim.add_argument("--sram-bytes", type=int, default=6 * 1024 * 1024, help="total weight SRAM")
    sim.add_argument("--bitwidths", choices=["file", "homogeneous"], default="file")
    sim.add_argument("--params", default=None)
    sim.add_argument("--out", default=None)
    sim.set_defaults(func=cmd_simulate)

    cmp_ = sub.add_parser("compare", help="compare platforms over networks, normalized to the first")
    cmp_.add_argument("--network", action="append", required=True, help="repeatable; file or bundled name")
    cmp_.add_argument("--config", action="append", required=True, help="repeatable; style:memory, e.g. vector:hbm2")
    cmp_.add_argument("--bitwidths", choices=["file", "homogeneous"], default="file")
    cmp_.add_argument("--budget", type=float, default=250.0)
    cmp_.add_argument("--sram-bytes", type=int, default=6 * 1024 * 1024)
    cmp_.add_argument("--params", default=None)
    cmp_.add_argument("--out", default=None)
    cmp_.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, NetworkFormatError, ConfigError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # internal invariant violation
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
