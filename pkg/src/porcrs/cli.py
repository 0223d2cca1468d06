"""Operator command line: directory-backed servers under one root.

Each "server" is a subdirectory ``server_<j>`` holding one share file per
outsourced file; the client side keeps a keyfile and a per-file metadata
file.  Every command is a thin binding over the client/server/store
modules -- no protocol logic lives here.

Exit codes: 0 success, 2 audit found failing servers, 3 repair could not
recover the file, 4 malformed artifact, 5 capacity exceeded, 6 bad
parameters or usage, 7 unrecoverable erasure pattern, 8 rejected append
order, 1 unexpected error.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
import time

from . import client, harness, store
from .auth import read_keyfile, write_keyfile, keygen, clear_prf_cache
from .server import apply_append, prove
from .errors import (
    CapacityError,
    FieldMismatchError,
    FormatError,
    OrderRejectedError,
    ParameterError,
    PorcrsError,
    UnrecoverableError,
)
from .field import field_from_token

_EXIT_CODES = (
    (FormatError, 4),
    (CapacityError, 5),
    (ParameterError, 6),
    (FieldMismatchError, 6),
    (UnrecoverableError, 7),
    (OrderRejectedError, 8),
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(6, f"{self.prog}: error: {message}\n")


def _rng(seed):
    return random.Random(seed) if seed is not None else random.SystemRandom()


def _load_meta_key(args):
    meta = store.read_meta(args.meta)
    sk = read_keyfile(args.key, meta.field)
    return meta, sk


def _read_share_or_none(root, j, fid):
    path = store.share_path(root, j, fid)
    try:
        return store.read_share(path)
    except (OSError, FormatError):
        return None


def cmd_keygen(args) -> int:
    fld = field_from_token(args.field)
    sk = keygen(fld, random.Random(args.seed) if args.seed is not None else None)
    write_keyfile(args.key, sk, fld)
    print(f"wrote key for {fld.token} to {args.key}")
    return 0


def cmd_outsource(args) -> int:
    fld = field_from_token(args.field)
    sk = read_keyfile(args.key, fld)
    params = client.SchemeParams(
        fld, args.n, args.k, args.stilde, args.eps_q, args.eps_p,
        args.window, args.block_size,
    )
    client.validate_params(params)
    with open(args.file, "rb") as fh:
        data = fh.read()
    rng = random.Random(args.seed) if args.seed is not None else None
    meta, shares = client.outsource(sk, params, data, rng=rng)
    store.write_share_tree(args.root, client.make_server_states(meta, shares))
    meta_path = args.meta or f"{meta.fid.hex()}.meta"
    store.write_meta(meta, meta_path)
    print(f"fid={meta.fid.hex()}")
    print(f"grid: {meta.ktilde} data rows + {meta.stilde} parity rows x {meta.n} servers")
    print(f"metadata: {meta_path}")
    return 0


def cmd_append(args) -> int:
    meta, sk = _load_meta_key(args)
    with open(args.file, "rb") as fh:
        payload = fh.read()
    row = client.row_blocks_from_payload(meta, payload)
    orders = client.append(sk, meta, row)
    for order in orders:
        path = store.share_path(args.root, order.server, meta.fid)
        state = store.read_share(path)
        try:
            apply_append(state, order)
        except OrderRejectedError as exc:
            if state.ctr >= order.target_ctr:
                print(f"server {order.server}: already applied ({exc})")
                continue
            raise
        store.write_share(state, path)
    store.write_meta(meta, args.meta)
    print(f"appended row {meta.ktilde}; ctr={meta.ctr}")
    return 0


def cmd_audit(args) -> int:
    meta, sk = _load_meta_key(args)
    l = args.l if args.l is not None else min(meta.r, 20)
    q = client.challenge(meta, l, _rng(args.seed))
    proof = []
    for j in range(1, meta.n + 1):
        state = _read_share_or_none(args.root, j, meta.fid)
        if state is None:
            proof.append(None)
            continue
        try:
            proof.append(prove(state, q))
        except PorcrsError:
            proof.append(None)
    verdicts = client.verify(sk, meta, q, proof)
    for j, ok in enumerate(verdicts, 1):
        print(f"server {j}: {'PASS' if ok else 'FAIL'}")
    failed = [str(j) for j, ok in enumerate(verdicts, 1) if not ok]
    if failed:
        print(f"audit failed for servers: {', '.join(failed)}")
        return 2
    print(f"audit passed ({l} rows challenged)")
    return 0


def cmd_repair(args) -> int:
    meta, sk = _load_meta_key(args)
    dumps = [
        _read_share_or_none(args.root, j, meta.fid) for j in range(1, meta.n + 1)
    ]
    result = client.redistribute(sk, meta, dumps)
    if result is None:
        print("repair failed: file unavailable")
        return 3
    out = args.out or f"{meta.fid.hex()}.recovered"
    with open(out, "wb") as fh:
        fh.write(result.data)
    store.write_share_tree(args.root, client.make_server_states(result.meta, result.shares))
    store.write_meta(result.meta, args.meta)
    print(f"recovered {len(result.data)} bytes to {out}")
    print(f"reshared at ctr={result.meta.ctr} with {result.meta.stilde} parity rows")
    return 0


def cmd_status(args) -> int:
    meta = store.read_meta(args.meta)
    print(f"fid={meta.fid.hex()} field={meta.field.token}")
    print(
        f"n={meta.n} k={meta.k} ktilde={meta.ktilde} stilde={meta.stilde} "
        f"r={meta.r} ctr={meta.ctr} chunks={meta.chunks}"
    )
    print(f"original_length={meta.original_length}")
    for j in range(1, meta.n + 1):
        path = store.share_path(args.root, j, meta.fid)
        if not os.path.exists(path):
            line = "missing"
        else:
            try:
                state = store.read_share(path)
                line = f"ok (r={state.r}, ctr={state.ctr})"
            except FormatError as exc:
                line = f"malformed: {exc}"
        print(f"server {j}: {line}")
    return 0


def cmd_bench(args) -> int:
    fld = field_from_token(args.field)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    queries = [int(s) for s in args.query_sizes.split(",") if s]
    rows = []
    rng = random.Random(args.seed if args.seed is not None else 0)
    sk = keygen(fld, rng)
    params = client.SchemeParams(
        fld, args.n, args.k, args.stilde, args.eps_q, args.eps_p,
        args.window, args.block_size,
    )
    client.validate_params(params)
    for size in sizes:
        data = rng.randbytes(size)
        t0 = time.perf_counter()
        meta, shares = client.outsource(sk, params, data, rng=rng)
        outsource_s = time.perf_counter() - t0
        servers = client.make_server_states(meta, shares)
        print(f"|F|={size}: outsource {outsource_s:.3f}s, r={meta.r}")
        rows.append((size, 0, "outsource", outsource_s))
        for l in queries:
            if l > meta.r:
                print(f"|F|={size} |Q|={l}: skipped (r={meta.r} too small)")
                continue
            q = client.challenge(meta, l, rng)
            t0 = time.perf_counter()
            proof = [prove(state, q) for state in servers]
            prove_s = time.perf_counter() - t0
            clear_prf_cache()
            t0 = time.perf_counter()
            verdicts = client.verify(sk, meta, q, proof)
            verify_s = time.perf_counter() - t0
            ok = all(verdicts)
            print(
                f"|F|={size} |Q|={l}: prove {prove_s:.3f}s, verify {verify_s:.3f}s,"
                f" {'pass' if ok else 'FAIL'}"
            )
            rows.append((size, l, "prove", prove_s))
            rows.append((size, l, "verify", verify_s))
    cost = harness.account_append_cost(
        harness.HarnessConfig(
            field_token=fld.token,
            n=args.n,
            k=args.k,
            stilde0=args.stilde,
            block_size=args.block_size,
            file_rows=4,
            seed=args.seed if args.seed is not None else 0,
        )
    )
    print(
        f"append bytes at ktilde/2*ktilde: {cost.bytes_small}/{cost.bytes_large}"
        f" (independent: {cost.independent_of_ktilde})"
    )
    with open(args.bench_out, "w") as fh:
        fh.write("file_bytes\tquery_size\tphase\tseconds\n")
        for size, l, phase, secs in rows:
            fh.write(f"{size}\t{l}\t{phase}\t{secs:.6f}\n")
        fh.write(
            f"0\t0\tappend_bytes\t{cost.bytes_small}\n"
            f"0\t0\tappend_bytes_2k\t{cost.bytes_large}\n"
        )
    print(f"wrote table to {args.bench_out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="porcrs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, meta_required=True):
        p.add_argument(
            "--root",
            default=os.environ.get("PORCRS_ROOT", "porcrs_root"),
            help="server root directory (default: $PORCRS_ROOT or ./porcrs_root)",
        )
        p.add_argument("--meta", required=meta_required, help="client metadata file")
        p.add_argument("--key", default="client.key", help="client keyfile")
        p.add_argument("--seed", type=int, default=None, help="deterministic RNG seed")

    def code_params(p):
        p.add_argument("--field", default="zp:2305843009213693951")
        p.add_argument("--n", type=int, default=15)
        p.add_argument("--k", type=int, default=9)
        p.add_argument("--stilde", type=int, default=12)
        p.add_argument("--eps-q", type=float, default=0.1, dest="eps_q")
        p.add_argument("--eps-p", type=float, default=0.05, dest="eps_p")
        p.add_argument("--window", type=int, default=20)
        p.add_argument("--block-size", type=int, default=4096, dest="block_size")

    p = sub.add_parser("keygen", help="generate and store a secret key")
    p.add_argument("--field", default="zp:2305843009213693951")
    p.add_argument("--key", default="client.key")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("outsource", help="encode, tag, and distribute a file")
    common(p, meta_required=False)
    code_params(p)
    p.add_argument("file")
    p.set_defaults(func=cmd_outsource)

    p = sub.add_parser("append", help="append one row of k blocks from a file")
    common(p)
    p.add_argument("file", help="payload of exactly k blocks")
    p.set_defaults(func=cmd_append)

    p = sub.add_parser("audit", help="challenge all servers and verify")
    common(p)
    p.add_argument("--l", type=int, default=None, help="challenge size")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("repair", help="download, decode, and re-share")
    common(p)
    p.add_argument("--out", default=None, help="where to write the recovered file")
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("status", help="show metadata and share health")
    common(p)
    p.set_defaults(func=cmd_status)

    p = sub.add_parser("bench", help="timing sweeps over file and query sizes")
    common(p, meta_required=False)
    code_params(p)
    p.add_argument("--sizes", default="1048576", help="comma-separated file sizes")
    p.add_argument(
        "--query-sizes", default="16,64", dest="query_sizes",
        help="comma-separated challenge sizes",
    )
    p.add_argument("--bench-out", default="bench.tsv", dest="bench_out")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except PorcrsError as exc:
        for klass, code in _EXIT_CODES:
            if isinstance(exc, klass):
                print(f"error: {exc}", file=sys.stderr)
                return code
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
