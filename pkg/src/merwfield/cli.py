"""Command-line client for the lattice service.

Every subcommand is a thin wrapper around one service endpoint.  By
default the app is called in-process; --server points the same client
at a remote instance.  Artifacts come back as text in the response and
are written to disk here, client-side.

Exit codes: 0 success, 2 usage or invalid parameters, 3 numerical
failure (nonconvergence, oracle mismatch, over-constrained ensemble).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

__all__ = ["main"]


class ClientError(RuntimeError):
    def __init__(self, status: int, detail: str):
        super().__init__(f"HTTP {status}: {detail}")
        self.status = status
        self.detail = detail


class ServiceClient:
    """POSTs to the app, in-process unless a server URL is given."""

    def __init__(self, server: str | None = None):
        if server:
            import httpx
            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            import warnings
            with warnings.catch_warnings():
                # some starlette builds warn about their bundled client
                # shim; nothing actionable on our side
                warnings.filterwarnings("ignore", message=".*httpx2.*")
                from fastapi.testclient import TestClient
            from .service import app
            self._client = TestClient(app, raise_server_exceptions=False)

    def post(self, endpoint: str, payload: dict | None = None) -> dict:
        resp = self._client.post(endpoint, json=payload or {})
        body = resp.json()
        if resp.status_code != 200:
            detail = body.get("detail", body) if isinstance(body, dict) else body
            raise ClientError(resp.status_code, _format_detail(detail))
        return body


def _format_detail(detail) -> str:
    """Flatten body-validation error lists into readable one-liners."""
    if isinstance(detail, list):
        parts = []
        for item in detail:
            if isinstance(item, dict):
                loc = ".".join(str(x) for x in item.get("loc", ())[1:])
                parts.append(f"{loc}: {item.get('msg', item)}" if loc else str(item))
            else:
                parts.append(str(item))
        return "; ".join(parts)
    return str(detail)


def _g(x: float) -> str:
    return "%.12g" % x


def _write(path, text: str) -> None:
    Path(path).write_text(text)
    print(f"wrote {path}")


def _lattice_payload(args) -> dict:
    jh, jv = args.jh, args.jv
    if args.J is not None:
        if jh is not None or jv is not None:
            raise ClientError(422, "--J replaces --jh/--jv; give one or the other")
        jh = jv = args.J
    return {"width": args.width, "cyclic": args.cyclic, "beta": args.beta,
            "mu": args.mu, "jh": 1.0 if jh is None else jh,
            "jv": 1.0 if jv is None else jv,
            "representation": args.representation}


def cmd_model(client: ServiceClient, args) -> int:
    payload = _lattice_payload(args)
    payload.update(before=args.before, after=args.after)
    out = client.post("/model", payload)
    print(f"lambda = {_g(out['lam'])}   (residual {out['residual']:.2e}, "
          f"{out['iterations']} iterations)")
    print(f"U   = {_g(out['U'])}")
    print(f"H   = {_g(out['H'])}")
    print(f"mag = {_g(out['mag'])}")
    if out.get("exact"):
        ex = out["exact"]
        print(f"exact U = {_g(ex['U'])}   err_U = {out['err_U']:.3e}")
        print(f"exact H = {_g(ex['H'])}   err_H = {out['err_H']:.3e}")
    if out["unreachable_contexts"]:
        print(f"note: {out['unreachable_contexts']} contexts are unreachable")
    if args.out:
        _write(args.out, out["model_json"])
    return 0


def cmd_sweep(client: ServiceClient, args) -> int:
    payload = {"j_min": args.j_min, "j_max": args.j_max, "steps": args.steps,
               "widths": args.widths, "before": args.before, "after": args.after,
               "cyclic": args.cyclic, "beta": args.beta,
               "representation": args.representation}
    out = client.post("/sweep", payload)
    failures = [r for r in out["rows"] if r.get("error")]
    for r in failures:
        print(f"J={_g(r['J'])} width={r['width']}: {r['error']}", file=sys.stderr)
    if args.out:
        _write(args.out, out["csv"])
    else:
        sys.stdout.write(out["csv"])
    return 0


def cmd_sample(client: ServiceClient, args) -> int:
    from .sampler import write_sidecar

    model_text = Path(args.model).read_text()
    payload = {"model_json": model_text, "rows": args.rows, "cols": args.cols,
               "seed": args.seed}
    out = client.post("/sample", payload)
    _write(args.out, out["pbm"])
    write_sidecar(str(args.out) + ".json", args.seed, args.rows, args.cols,
                  model_text)
    print(f"wrote {args.out}.json")
    print(f"mean spin = {_g(out['mean_spin'])}   model {out['model_hash'][:12]}")
    return 0


def cmd_analytic(client: ServiceClient, args) -> int:
    out = client.post("/analytic", {"J": args.J, "beta": args.beta})
    print(f"J = {_g(out['J'])}   beta = {_g(out['beta'])}")
    print(f"U = {_g(out['U'])}")
    print(f"H = {_g(out['H'])}")
    print(f"quadrature error <= {out['quadrature_error']:.2e}")
    print(f"critical coupling = {_g(out['critical_coupling'])}"
          + ("   (near critical)" if out["near_critical"] else ""))
    return 0


def cmd_mc(client: ServiceClient, args) -> int:
    jh = args.J if args.jh is None else args.jh
    jv = args.J if args.jv is None else args.jv
    payload = {"rows": args.rows, "cols": args.cols, "sweeps": args.sweeps,
               "seed": args.seed, "burn_in": args.burn_in, "beta": args.beta,
               "mu": args.mu, "jh": jh, "jv": jv}
    out = client.post("/mc", payload)
    print(f"U   = {_g(out['u_mean'])} +- {_g(out['stderr_u'])}")
    print(f"mag = {_g(out['mag_mean'])} +- {_g(out['stderr_mag'])}")
    print(f"burn-in {out['burn_in']} sweeps")
    if args.out:
        _write(args.out, out["csv"])
    return 0


def cmd_tfim(client: ServiceClient, args) -> int:
    out = client.post("/tfim", {"J": args.J, "h": args.h, "lat": args.lat})
    print(f"lambda = {_g(out['lam'])}   lat = {out['lat']}")
    if args.out:
        _write(args.out, out["csv"])
    else:
        sys.stdout.write(out["csv"])
    return 0


def cmd_path(client: ServiceClient, args) -> int:
    circuit = Path(args.circuit).read_text()
    out = client.post("/path", {"circuit": circuit, "layer": args.layer})
    print(f"layers = {out['num_layers']}   log weight = {_g(out['log_weight'])}")
    dist = out["distribution"]
    if args.out:
        lines = ["index,prob"] + ["%d,%.17g" % (i, p) for i, p in enumerate(dist)]
        _write(args.out, "\n".join(lines) + "\n")
    else:
        print(f"layer {out['layer']} distribution:")
        for i, p in enumerate(dist):
            print("%4d  %.12g" % (i, p))
    return 0


def cmd_mermin(client: ServiceClient, args) -> int:
    out = client.post("/mermin")
    for pair in ("AB", "AC", "BC"):
        print(f"Pr({pair[0]}={pair[1]})={_g(out[pair])}")
    verdict = "violated" if out["violated"] else "not violated"
    rel = "<" if out["sum"] < 1 else ">="
    print(f"sum={_g(out['sum'])} {rel} 1: {verdict}")
    return 0


def cmd_sat3(client: ServiceClient, args) -> int:
    dimacs = Path(args.cnf).read_text()
    out = client.post("/sat3", {"dimacs": dimacs})
    print(f"variables: {out['num_vars']}, clauses: {out['num_clauses']}")
    print(f"models: {out['count']}")
    bits = "".join(str((out["top_index"] >> (out["num_vars"] - 1 - i)) & 1)
                   for i in range(out["num_vars"]))
    label = "assignment" if out["count"] == 1 else "top assignment"
    print(f"{label}: {bits} posterior={_g(out['top_prob'])}")
    return 0


def cmd_serve(client: ServiceClient, args) -> int:
    from .service import serve

    serve(host=args.host, port=args.port)
    return 0


def _add_lattice_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=int, default=10)
    cyc = p.add_mutually_exclusive_group()
    cyc.add_argument("--cyclic", dest="cyclic", action="store_true", default=True,
                     help="cyclic stripes (default)")
    cyc.add_argument("--open", dest="cyclic", action="store_false",
                     help="open boundary stripes")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--J", type=float, default=None,
                   help="set both couplings at once")
    p.add_argument("--jh", type=float, default=None)
    p.add_argument("--jv", type=float, default=None)
    rep = p.add_mutually_exclusive_group()
    rep.add_argument("--dense", dest="representation", action="store_const",
                     const="dense", default="auto")
    rep.add_argument("--implicit", dest="representation", action="store_const",
                     const="implicit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="merwfield",
        description="Nearly exact lattice models via entropy-maximizing walks")
    parser.add_argument("--server", default=None,
                        help="URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", help="derive a scanning model")
    _add_lattice_flags(p)
    p.add_argument("--before", "-b", type=int, default=3)
    p.add_argument("--after", "-a", type=int, default=3)
    p.add_argument("--out", default=None, help="write the model JSON here")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("sweep", help="coupling sweep with exact comparison")
    p.add_argument("--j-min", type=float, default=0.05)
    p.add_argument("--j-max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--widths", type=int, nargs="+", default=[10])
    p.add_argument("--before", "-b", type=int, default=3)
    p.add_argument("--after", "-a", type=int, default=3)
    cyc = p.add_mutually_exclusive_group()
    cyc.add_argument("--cyclic", dest="cyclic", action="store_true", default=True)
    cyc.add_argument("--open", dest="cyclic", action="store_false")
    p.add_argument("--beta", type=float, default=1.0)
    rep = p.add_mutually_exclusive_group()
    rep.add_argument("--dense", dest="representation", action="store_const",
                     const="dense", default="auto")
    rep.add_argument("--implicit", dest="representation", action="store_const",
                     const="implicit")
    p.add_argument("--out", default=None, help="write the CSV here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sample", help="draw a field from a model document")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--rows", type=int, default=256)
    p.add_argument("--cols", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="field.pbm")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("analytic", help="exact energy/entropy per node")
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("mc", help="Metropolis baseline on a torus")
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=64)
    p.add_argument("--sweeps", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--J", type=float, default=0.2)
    p.add_argument("--jh", type=float, default=None)
    p.add_argument("--jv", type=float, default=None)
    p.add_argument("--out", default=None, help="write the per-sweep CSV here")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("tfim", help="joint angle distribution of the chain")
    p.add_argument("--J", type=float, default=0.0)
    p.add_argument("--h", type=float, default=0.0)
    p.add_argument("--lat", type=int, default=100)
    p.add_argument("--out", default=None, help="write the matrix CSV here")
    p.set_defaults(func=cmd_tfim)

    p = sub.add_parser("path", help="evaluate a layered circuit ensemble")
    p.add_argument("circuit", help="circuit JSON file")
    p.add_argument("--layer", type=int, default=-1)
    p.add_argument("--out", default=None, help="write the distribution CSV here")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("mermin", help="three-party agreement probabilities")
    p.set_defaults(func=cmd_mermin)

    p = sub.add_parser("sat3", help="filter a 3-SAT instance")
    p.add_argument("cnf", help="DIMACS CNF file (3 literals per clause)")
    p.set_defaults(func=cmd_sat3)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        client = None if args.func is cmd_serve else ServiceClient(args.server)
        return args.func(client, args)
    except ClientError as e:
        print(f"error: {e.detail}", file=sys.stderr)
        return 3 if e.status >= 500 else 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as e:
        print(f"error: invalid JSON input: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
