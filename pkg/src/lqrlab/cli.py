"""Command-line client for the laboratory service.

The CLI never calls core functions directly: every subcommand posts to
the HTTP API, by default against an in-process instance of the service
(no server needed), or against a running one via --server.  Exit code 0
on success, 1 on configuration or write errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

from .errors import ConfigurationError


def _client(server):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    # sync bridge into the ASGI app; no socket, no server process
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service import create_app
    return TestClient(create_app(), base_url="http://lqrlab")


def _post(client, path, payload):
    response = client.post(path, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise ConfigurationError(f"{path} failed ({response.status_code}): "
                                 f"{detail}")
    return response.json()


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}")


def _write(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigurationError(f"cannot write {path}: {exc}")


def _fmt_matrix(name, rows):
    width = max(len(f"{v: .10f}") for row in rows for v in row)
    lines = [f"{name} ="]
    for row in rows:
        lines.append("    [" + "  ".join(f"{v: .{10}f}".rjust(width)
                                         for v in row) + "]")
    return "\n".join(lines)


def parse_dims(text):
    """Dimension lists: '2..64' doubles from 2 to 64, or '2,4,8' verbatim."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        try:
            lo, hi = int(lo), int(hi)
        except ValueError:
            raise ConfigurationError(f"bad dims range {text!r}")
        if lo < 1 or hi < lo:
            raise ConfigurationError(f"bad dims range {text!r}")
        dims = []
        d = lo
        while d <= hi:
            dims.append(d)
            d *= 2
        return dims
    try:
        return [int(part) for part in text.split(",")]
    except ValueError:
        raise ConfigurationError(f"bad dims list {text!r}")


def cmd_solve(client, args):
    doc = _load_json(args.instance)
    out = _post(client, "/solve", {"instance": doc})
    print(_fmt_matrix("M", out["M"]))
    print(_fmt_matrix("K", out["K"]))
    print(f"spectral radius = {out['spectral_radius']:.10f}")
    print(f"noise cost trace(M Sigma)/2 = {out['noise_cost']:.10g}")
    return 0


def cmd_identify(client, args):
    doc = _load_json(args.instance)
    out = _post(client, "/identify", {
        "instance": doc, "episodes": args.episodes,
        "excitation_std": args.excitation, "seed": args.seed,
        "ridge": args.ridge,
    })
    print(_fmt_matrix("A_hat", out["A_hat"]))
    print(_fmt_matrix("B_hat", out["B_hat"]))
    print(f"transitions used = {out['n_transitions']} "
          f"(samples {out['samples_used']})")
    if out["gain"] is not None:
        print(_fmt_matrix("K", out["gain"]))
    else:
        print(f"gain synthesis failed: {out['synthesis_error']}")
    return 0


def cmd_bench(client, args):
    doc = _load_json(args.spec)
    out = _post(client, "/bench", {"spec": doc, "seed_base": args.seed_base})
    _write(args.out, out["csv"])
    print(f"wrote {args.out}")
    header = f"{'method':>14} {'samples':>8} {'median':>12} {'stab':>5}"
    print(header)
    for row in out["summaries"]:
        median = "inf" if row["median"] is None else f"{row['median']:.6g}"
        print(f"{row['method']:>14} {row['samples']:>8} {median:>12} "
              f"{row['stabilization_fraction']:>5.2f}")
    return 0


def cmd_plot(client, args):
    try:
        with open(args.results) as fh:
            csv_text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {args.results}: {exc}")
    out = _post(client, "/plot", {"csv": csv_text, "metric": args.metric})
    _write(args.out, out["svg"])
    print(f"wrote {args.out}")
    return 0


def cmd_diag_variance(client, args):
    out = _post(client, "/diag/variance", {
        "dims": parse_dims(args.dims), "sigma": args.sigma,
        "n_samples": args.samples, "seed": args.seed,
    })
    print(f"{'dim':>5} {'mean |G|':>12} {'exact':>12}")
    for d, mn, ex in zip(out["dims"], out["mean_norms"],
                         out["expected_norms"]):
        print(f"{d:>5} {mn:>12.4f} {ex:>12.4f}")
    if out["slope"] is not None:
        print(f"log-log slope = {out['slope']:.4f} (expected 1.5)")
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lqrlab",
        description="Sample-complexity laboratory for LQR methods")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service "
                             "(default: run in process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="exact infinite-horizon solution")
    p.add_argument("instance", help="instance JSON file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("identify", help="least-squares identification")
    p.add_argument("instance", help="instance JSON file")
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--excitation", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ridge", type=float, default=0.0)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("bench", help="run a benchmark spec")
    p.add_argument("spec", help="spec JSON file (instance + methods "
                                "+ seeds + budgets)")
    p.add_argument("--out", default="results.csv")
    p.add_argument("--seed-base", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="render a results CSV as SVG")
    p.add_argument("results", help="CSV produced by bench")
    p.add_argument("--metric", choices=("cost", "stabilization"),
                   default="cost")
    p.add_argument("--out", default="figure.svg")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("diag", help="diagnostics")
    diag_sub = p.add_subparsers(dest="diagnostic", required=True)
    v = diag_sub.add_parser("variance",
                            help="score-gradient norm vs dimension")
    v.add_argument("--dims", default="2..64",
                   help="'lo..hi' doubling range or comma list")
    v.add_argument("--sigma", type=float, default=1.0)
    v.add_argument("--samples", type=int, default=10_000)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_diag_variance)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "serve":
            return cmd_serve(args)
        with _client(args.server) as client:
            return args.func(client, args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
