"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import aes, attacks, experiment, iso, leakage
from .lfsr import RandomizationContext

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3


class InvariantError(RuntimeError):
    """An internal consistency check failed."""


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _hex_bytes(n: int):
    def parse(text: str) -> bytes:
        t = text.lower().removeprefix("0x")
        try:
            b = bytes.fromhex(t)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a hex string: {text!r}")
        if len(b) != n:
            raise argparse.ArgumentTypeError(f"expected {2 * n} hex digits, got {len(t)}")
        return b
    return parse


def _seed(text: str) -> int:
    t = text.lower().removeprefix("0x")
    if not 1 <= len(t) <= 8:
        raise argparse.ArgumentTypeError("seed must be up to 8 hex digits")
    try:
        v = int(t, 16)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a hex seed: {text!r}")
    if (v >> 16) == 0 or (v & 0xFFFF) == 0:
        raise argparse.ArgumentTypeError("both 16-bit halves of the seed must be nonzero")
    return v


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _byte_index(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 16:
        raise argparse.ArgumentTypeError("byte index must be in 0..15")
    return v


def _selection(text: str) -> str:
    try:
        attacks.parse_selection(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    return text


def _catalog(path):
    if path is None:
        return iso.default_catalog(32)
    try:
        return iso.load_catalog(path)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not a JSON catalog ({exc})")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_search_iso(args) -> int:
    all_sets = iso.enumerate_all()
    bad = [ps.id for ps in all_sets if not iso.verify_isomorphism(ps)]
    if bad:
        raise InvariantError(f"enumerated sets failed the homomorphism check: {bad}")
    phis = sorted(iso.phi_candidates())
    for phi in phis:
        lams = sorted(iso.lambda_candidates(phi))
        note = "" if lams == list(range(8, 16)) else "  (differs from 8..15)"
        print(f"phi={phi}: lambda in {lams}{note}")
    print(f"{len(all_sets)} isomorphisms over {sum(len(iso.lambda_candidates(p)) for p in phis)}"
          f" (phi, lambda) pairs, all verified")
    chosen = iso.select_low_cost(all_sets, args.top)
    iso.save_catalog(chosen, args.out)
    costs = [ps.gate_cost for ps in chosen]
    print(f"wrote {len(chosen)} sets to {args.out} (gate cost {min(costs)}..{max(costs)})")
    return EXIT_OK


def cmd_check_published_sets(args) -> int:
    canon = iso.canonical_set()
    ok = iso.verify_isomorphism(canon)
    print(f"canonical phi={canon.phi} lambda={canon.lam}: "
          f"{'valid isomorphism' if ok else 'NOT a valid isomorphism'}")
    for i, v in enumerate(iso.check_published_sets(), 1):
        status = f"valid as {v.orientation}" if v.orientation != "none" else "invalid"
        print(f"set {i} phi={v.phi} lambda={v.lam}: {status}")
        if v.note:
            print(f"  {v.note}")
    return EXIT_OK


def _read_blocks(path) -> np.ndarray:
    data = sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()
    if len(data) % 16:
        raise UsageError(f"input length {len(data)} is not a multiple of 16 bytes")
    return np.frombuffer(data, dtype=np.uint8).reshape(-1, 16)


def _write_bytes(path, data: bytes):
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(path).write_bytes(data)


def _backend(args):
    if args.mode == "lut":
        return "lut"
    catalog = _catalog(args.catalog)
    if args.mode == "composite":
        if not 0 <= args.set_id < len(catalog):
            raise UsageError(f"--set-id must be in 0..{len(catalog) - 1}")
        return catalog[args.set_id]
    if args.seed is None:
        raise UsageError("randomized mode needs --seed")
    return RandomizationContext.from_seed(args.seed, catalog)


def _crypt(args, decrypt: bool) -> int:
    blocks = _read_blocks(args.inp)
    fn = aes.decrypt_blocks if decrypt else aes.encrypt_blocks
    if len(blocks) == 0:
        _write_bytes(args.out, b"")
        return EXIT_OK
    out = fn(blocks, args.key, _backend(args))
    if args.mode != "lut" and not np.array_equal(out, fn(blocks, args.key, "lut")):
        raise InvariantError(f"{args.mode} backend disagrees with the reference S-box")
    _write_bytes(args.out, np.ascontiguousarray(out, dtype=np.uint8).tobytes())
    return EXIT_OK


def cmd_encrypt(args) -> int:
    return _crypt(args, decrypt=False)


def cmd_decrypt(args) -> int:
    return _crypt(args, decrypt=True)


def cmd_gen_traces(args) -> int:
    cfg = leakage.LeakConfig(args.mode, args.decoys, args.sigma, args.byte,
                             args.algorithmic_noise)
    catalog = _catalog(args.catalog) if args.mode == "protected" else None
    if catalog is not None and args.decoys and len(catalog) < 3:
        raise UsageError("decoys need a catalog of at least 3 sets")
    ts = leakage.generate_set(args.n, args.key, cfg, args.seed, catalog)
    leakage.write_traces(ts, args.out)
    print(f"wrote {len(ts)} {args.mode} traces x {cfg.samples_per_trace} samples to {args.out}")
    return EXIT_OK


def cmd_attack(args) -> int:
    ts = leakage.read_traces(args.inp)
    if args.method == "cpa":
        res = attacks.cpa_attack(ts, args.byte)
    else:
        res = attacks.dom_attack(ts, args.byte, args.selection)
    if args.report:
        experiment.emit_report(res, args.report)
    byte = ts.config.target_byte if args.byte is None else args.byte
    points = ts.config.points
    print(f"{args.method} on byte {byte}, {res.n_traces} traces")
    for r, g in enumerate(res.ranking[:args.top], 1):
        print(f"  {r:3d}  0x{g:02x}  peak={res.peaks[g]:.6f}  at {points[res.peak_index[g]]}")
    return EXIT_OK


def cmd_mtd(args) -> int:
    ts = leakage.read_traces(args.inp)
    if leakage.key_fingerprint(args.key) != ts.key_fingerprint:
        raise UsageError("--key does not match the key fingerprint stored in the trace file")
    byte = ts.config.target_byte if args.byte is None else args.byte
    d = attacks.measurements_to_disclosure(ts, args.key[byte], args.method, args.selection,
                                           args.step, byte)
    experiment.write_disclosure(d, args.out)
    at = d.disclosed_at if d.disclosed else f"not within {len(ts)} traces"
    print(f"{args.method} disclosure of byte {byte}: {at}")
    return EXIT_OK


def cmd_run_experiment(args) -> int:
    cfg = experiment.ExperimentConfig(
        key=args.key, seed=args.seed, n_unprotected=args.n_unprotected,
        n_protected=args.n_protected, noise_sigma=args.sigma, decoys=args.decoys,
        catalog_path=args.catalog, out_dir=args.out_dir, target_byte=args.byte,
        step=args.step, selection=args.selection,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc))
    summary = experiment.run_experiment(cfg)
    print(experiment.summary_csv(summary), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="towerbox", description="Randomized tower-field AES S-box toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    default_key = experiment.DEFAULT_KEY.hex()
    default_seed = f"{experiment.ACCEPTANCE_BASE_SEED:08x}"

    s = sub.add_parser("search-iso", help="enumerate parameter sets and write a catalog")
    s.add_argument("--out", required=True, help="catalog JSON path")
    s.add_argument("--top", type=_positive, default=32, help="number of cheapest sets to keep")
    s.set_defaults(func=cmd_search_iso)

    s = sub.add_parser("check-paper-sets", help="validate the published example matrices")
    s.set_defaults(func=cmd_check_published_sets)

    for name, func, what in (("encrypt", cmd_encrypt, "plaintext"),
                             ("decrypt", cmd_decrypt, "ciphertext")):
        s = sub.add_parser(name, help=f"AES-128 ECB {name}ion of a 16-byte aligned file")
        s.add_argument("--key", type=_hex_bytes(16), required=True, help="32 hex digits")
        s.add_argument("--in", dest="inp", required=True, help=f"{what} file, - for stdin")
        s.add_argument("--out", help="output file (default stdout)")
        s.add_argument("--mode", choices=("lut", "composite", "randomized"), default="lut")
        s.add_argument("--catalog", help="catalog JSON (default: built-in 32 sets)")
        s.add_argument("--seed", type=_seed, help="32-bit hex seed for randomized mode")
        s.add_argument("--set-id", type=int, default=0, help="catalog set for composite mode")
        s.set_defaults(func=func)

    s = sub.add_parser("gen-traces", help="simulate Hamming-weight power traces")
    s.add_argument("--n", type=_positive, required=True, help="number of traces")
    s.add_argument("--mode", choices=leakage.MODES, default="unprotected")
    s.add_argument("--sigma", type=_nonneg_float, default=experiment.SIGMA_STAR,
                   help=f"noise std-dev in HW units (default {experiment.SIGMA_STAR})")
    s.add_argument("--seed", type=_seed, default=_seed(default_seed), help="32-bit hex seed")
    s.add_argument("--key", type=_hex_bytes(16), default=experiment.DEFAULT_KEY,
                   help=f"32 hex digits (default {default_key})")
    s.add_argument("--decoys", type=_on_off, default=True, help="on|off (protected mode)")
    s.add_argument("--catalog", help="catalog JSON (default: built-in 32 sets)")
    s.add_argument("--byte", type=_byte_index, default=0, help="target key byte")
    s.add_argument("--algorithmic-noise", action="store_true",
                   help="add the HW of the other 15 S-box outputs to every sample")
    s.add_argument("--out", required=True, help="trace file path")
    s.set_defaults(func=cmd_gen_traces)

    s = sub.add_parser("attack", help="rank key-byte guesses with CPA or distance of means")
    s.add_argument("--in", dest="inp", required=True, help="trace file")
    s.add_argument("--method", choices=("cpa", "dom"), default="cpa")
    s.add_argument("--byte", type=_byte_index, help="plaintext byte (default: file target)")
    s.add_argument("--selection", type=_selection, default="hw4",
                   help="DoM selection: hw4 or monobit:<b>")
    s.add_argument("--report", help="ranking CSV; a <stem>_curves.csv is written next to it")
    s.add_argument("--top", type=_positive, default=5, help="guesses to print")
    s.set_defaults(func=cmd_attack)

    s = sub.add_parser("mtd", help="measurements-to-disclosure scan as CSV")
    s.add_argument("--in", dest="inp", required=True, help="trace file")
    s.add_argument("--key", type=_hex_bytes(16), required=True, help="the true key")
    s.add_argument("--method", choices=("cpa", "dom"), default="cpa")
    s.add_argument("--selection", type=_selection, default="hw4")
    s.add_argument("--step", type=_positive, default=50)
    s.add_argument("--byte", type=_byte_index, help="plaintext byte (default: file target)")
    s.add_argument("--out", required=True, help="CSV path")
    s.set_defaults(func=cmd_mtd)

    s = sub.add_parser("run-experiment", help="paired unprotected/protected attack experiment")
    s.add_argument("--key", type=_hex_bytes(16), default=experiment.DEFAULT_KEY)
    s.add_argument("--seed", type=_seed, default=_seed(default_seed))
    s.add_argument("--n-unprotected", type=int, default=1000)
    s.add_argument("--n-protected", type=int, default=6000)
    s.add_argument("--sigma", type=_nonneg_float, default=experiment.SIGMA_STAR)
    s.add_argument("--decoys", type=_on_off, default=True)
    s.add_argument("--catalog")
    s.add_argument("--byte", type=_byte_index, default=0)
    s.add_argument("--step", type=_positive, default=50)
    s.add_argument("--selection", type=_selection, default="hw4")
    s.add_argument("--out-dir", default="experiment_out")
    s.set_defaults(func=cmd_run_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"towerbox {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, leakage.TraceFileError) as exc:
        print(f"towerbox {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvariantError as exc:
        print(f"towerbox {args.command}: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        # bad catalog contents and similar input problems
        print(f"towerbox {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
