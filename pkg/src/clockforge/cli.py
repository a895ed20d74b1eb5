"""``clockforge`` command line.

Exit codes: 0 when every check passes, 1 when a bound is violated, 2 for
usage, parse or parameter-range errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .circuits import Circuit, effect_zone_and_shadow, layerize
from .clock import FkOptions, build_fk_hamiltonian, history_state, verify_traceorder
from .linalg import (
    ATOL,
    dense_cap,
    dephasing_channel,
    eigensolve_hermitian,
    random_channel,
    random_state,
    replace_channel,
)
from .lngs import (
    A_LOCAL,
    B_LOCAL,
    EPS_LIMIT,
    build_lngs_hamiltonian,
    depth_bound_certificate,
    good_indices,
    make_noisy_ground_state,
    random_noise_spec,
    verify_lngs_inequalities,
)
from .qlwc import (
    INNER_CODES,
    MESSAGES,
    ErrorChannel,
    build_qlwc,
    erasure,
    random_single_site_channel,
    recover,
)


class UsageError(Exception):
    pass


class Report:
    def __init__(self, args, argv):
        self.data = {
            "command": list(argv),
            "seed": args.seed,
            "tolerances": {"equality": args.tol, "eigen_residual": 1e-8},
            "checks": [],
        }
        self.start = time.perf_counter()

    def check(self, name, value, bound, passed):
        self.data["checks"].append(
            {"name": name, "value": _clean(value), "bound": _clean(bound), "pass": bool(passed)}
        )
        return passed

    def add(self, key, value):
        self.data[key] = _clean(value)

    @property
    def passed(self):
        return all(c["pass"] for c in self.data["checks"])

    def finish(self):
        self.data["all_pass"] = self.passed
        self.data["wall_time_s"] = round(time.perf_counter() - self.start, 3)
        return self.data


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(repr(float(x))) if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _load_circuit(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return Circuit.from_json(data)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"{path}: invalid circuit: {exc}") from exc


def _sites(text):
    if text is None or text == "":
        return []
    try:
        return [int(s) for s in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad site list {text!r}") from exc


def _emit(data, path):
    text = json.dumps(data, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# --- subcommands ----------------------------------------------------------------


def cmd_build(args, report):
    c = _load_circuit(args.circuit)
    opts = FkOptions(
        include_in=not args.no_in,
        include_out=not args.no_out,
        in_checked_sites=tuple(_sites(args.checked)) if args.checked is not None else None,
        clock_dimension=args.clock_dim,
        ordering=args.ordering,
    )
    try:
        h = build_fk_hamiltonian(c, opts)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    terms = []
    for t in h.terms:
        m = t.dense()
        terms.append({
            "tag": t.tag,
            "support": list(t.support),
            "dim": m.shape[0],
            "matrix": [[float(z.real), float(z.imag)] for z in m.reshape(-1)],
        })
    bound = h.locality_bound()
    wide = "wide_gate" in h.flags or "nonlocal_carry" in h.flags
    report.check("term locality", h.locality, bound, wide or h.locality <= bound)
    report.add("clock", {"k": h.clock.k, "T": h.clock.T, "d": h.clock.d, "qubits": h.clock.nt,
                         "ordering": h.clock.ordering})
    report.add("flags", list(h.flags))
    report.add("locality", h.locality)
    report.add("n_terms", len(terms))
    report.add("terms", terms)


def cmd_spectrum(args, report):
    c = _load_circuit(args.circuit)
    opts = FkOptions(include_out=not args.no_out, clock_dimension=args.clock_dim, ordering=args.ordering)
    h = build_fk_hamiltonian(c, opts)
    try:
        res = eigensolve_hermitian(h, how_many=args.how_many)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report.add("dimension", h.shape.dim)
    report.add("method", res.method)
    report.add("eigenvalues", [float(v) for v in res.values])
    report.check("eigen residual", float(res.residuals.max()), 1e-8, res.residuals.max() <= 1e-8)
    if args.no_out:
        report.check("ground energy is zero", float(res.values[0]), args.tol, abs(res.values[0]) <= args.tol)


def cmd_lightcone(args, report):
    c = _load_circuit(args.circuit)
    layering = layerize(c)
    target = _sites(args.target)
    try:
        rep = effect_zone_and_shadow(layering, target)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report.add("layers", [list(layer) for layer in layering.layers])
    report.add("analysis", rep.to_json())
    report.check("shadow size", len(rep.shadow), rep.shadow_bound, len(rep.shadow) <= rep.shadow_bound)


def cmd_traceorder(args, report):
    c = _load_circuit(args.circuit)
    traced = _sites(args.traced)
    witness = None
    if c.witness_count:
        rng = np.random.default_rng(args.seed)
        witness = random_state(c.shape.dims[: c.witness_count], rng)
    hist = history_state(c, witness, k=args.clock_dim)
    route = "full" if hist.shape.dim <= _dense_cap(args) else "sparse"
    res = verify_traceorder(hist, traced, route=route)
    report.add("route", route)
    report.check("snapshot average matches the reduced history state", res.distance, args.tol,
                 res.distance <= args.tol)


def _dense_cap(args):
    return args.dense_cap or dense_cap()


def cmd_lngs(args, report):
    n, eps, delta = args.n, args.eps, args.delta
    if not 0 <= eps < EPS_LIMIT:
        raise UsageError(f"--eps {eps} is outside the allowed range 0 <= eps < 1/48")
    if not 0 <= delta < 1 / 8 - 6 * eps:
        raise UsageError(f"--delta {delta} is outside the allowed range 0 <= delta < 1/8 - 6 eps")
    if n < 2 or n > args.max_n:
        raise UsageError(f"--n must be between 2 and {args.max_n}")
    h = build_lngs_hamiltonian(n)
    report.check("terms are 3-local on a line", h.locality, 3, h.is_geometrically_local())
    psi = h.ground_state()
    if 3**n <= _dense_cap(args):
        res = eigensolve_hermitian(h.terms, how_many=2)
        overlap = abs(np.vdot(psi.dense(), res.vectors[:, 0])) ** 2
        report.check("ground energy", float(res.values[0]), args.tol, abs(res.values[0]) <= args.tol)
        report.check("spectral gap above ground state", float(res.values[1] - res.values[0]), 1e-8,
                     res.values[1] - res.values[0] > 1e-8)
        report.check("ground state overlap with history state", float(overlap), 1 - 1e-9, overlap >= 1 - 1e-9)
    worst_joint = 0.0
    worst_exact = 0.0
    worst_marg = 0.0
    for i in range(n):
        rho_i = psi.reduced([i])
        a = float(np.trace(rho_i @ A_LOCAL).real)
        worst_marg = max(worst_marg, abs(a - (n + 2 + i) / (2 * (n + 1))))
        for j in range(i + 1, n):
            rho = psi.reduced([i, j])
            joint = float(np.trace(rho @ np.kron(A_LOCAL, B_LOCAL)).real)
            worst_joint = max(worst_joint, abs(joint))
            worst_exact = max(worst_exact, abs(joint - (i + j + 2) / (2 * (n + 1))))
    # the t = 0 snapshot |2...2> passes both projectors, so this claimed identity cannot hold
    report.check("Tr(A_i B_j Psi) = 0 for all i < j", worst_joint, 1e-12, worst_joint <= 1e-12)
    report.check("Tr(A_i B_j Psi) = (i+j+2)/(2(n+1)) (0-based)", worst_exact, 1e-12, worst_exact <= 1e-12)
    report.check("Tr(A_i Psi) = (n+2+i)/(2(n+1)) (0-based i)", worst_marg, 1e-12, worst_marg <= 1e-12)

    seeds = np.random.SeedSequence(args.seed).spawn(args.trials)

    def trial(seq):
        rng = np.random.default_rng(seq)
        spec = random_noise_spec(n, eps, rng)
        sigma = make_noisy_ground_state(h, spec)
        good = good_indices(spec)
        reports = [verify_lngs_inequalities(sigma, i, j, eps) for i in good for j in good if i < j]
        return (
            len(good),
            max((r.joint for r in reports), default=0.0),
            min((min(r.a_value, r.b_value) for r in reports), default=1.0),
            all(r.ok for r in reports),
        )

    with ThreadPoolExecutor(max_workers=max(args.jobs, 1)) as pool:
        results = list(pool.map(trial, seeds))
    min_good = min((r[0] for r in results), default=n)
    report.check("good indices >= n/2", min_good, n / 2, min_good >= n / 2)
    max_joint = max((r[1] for r in results), default=0.0)
    min_marg = min((r[2] for r in results), default=1.0)
    report.check("noisy Tr(A_i B_j sigma) <= 4 eps", max_joint, 4 * eps, max_joint <= 4 * eps + ATOL)
    report.check("noisy Tr(A_i sigma), Tr(B_j sigma) >= 1/2 - 8 eps", min_marg, 0.5 - 8 * eps,
                 min_marg >= 0.5 - 8 * eps - ATOL)
    cert = depth_bound_certificate(n, eps, delta)
    report.check("certificate margin", cert.margin, 0.0, cert.margin > 0)
    report.add("depth_bound", cert.depth_bound)
    report.add("trials", args.trials)


def _parse_error(code, text):
    """``kind:register:sites`` e.g. ``erase:state:3`` or ``random:time:0,1``."""
    if text in (None, "", "none"):
        return None
    parts = text.split(":")
    if len(parts) != 3 or parts[0] not in ("erase", "random", "dephase") or parts[1] not in ("state", "time"):
        raise UsageError(f"bad --error {text!r}; expected kind:register:sites with kind in erase/random/dephase")
    kind, register, sites = parts[0], parts[1], _sites(parts[2])
    limit = code.inner.n if register == "state" else code.nt
    if any(not 0 <= s < limit for s in sites):
        raise UsageError(f"--error sites {sites} outside the {register} register (0..{limit - 1})")
    if len(sites) > code.inner.correctable:
        raise UsageError(
            f"--error touches {len(sites)} sites but the correctable budget is (d-1)/2 = {code.inner.correctable}"
        )
    glob = tuple(code.code_site(s) if register == "state" else s for s in sites)
    dims = (2,) * len(glob)
    if kind == "erase":
        ch = replace_channel(glob, dims)
    elif kind == "dephase":
        ch = dephasing_channel(glob, dims)
    else:
        ch = random_channel(glob, dims, np.random.default_rng(0))
    return ErrorChannel(ch.support, ch.kraus)


def cmd_qlwc(args, report):
    if args.inner not in INNER_CODES:
        raise UsageError(f"unknown inner code {args.inner!r}; choose from {sorted(INNER_CODES)}")
    if not args.delta > 0:
        raise UsageError("--delta must be positive")
    inner = INNER_CODES[args.inner]()
    code = build_qlwc(inner, args.delta)
    p = code.params
    report.add("parameters", p.to_json())
    for name, ok in p.identities().items():
        report.check(name, ok, True, ok)
    if args.message not in MESSAGES:
        raise UsageError(f"unknown message {args.message!r}; choose from {sorted(MESSAGES)}")
    message, reference = MESSAGES[args.message]
    fixed = _parse_error(code, args.error)

    clean = recover(code, message, reference)
    report.check("junk weight with no error <= delta^2/4", clean.junk_weight, args.delta**2 / 4,
                 clean.junk_weight <= args.delta**2 / 4 + 1e-9)
    report.check("recovery with no error", clean.trace_distance, args.delta, clean.trace_distance <= args.delta + 1e-9)

    channels = []
    if fixed is not None:
        channels.append(("given error", fixed))
    else:
        channels += [(f"erase state {s}", erasure(code, s)) for s in range(inner.n)]
        seeds = np.random.SeedSequence(args.seed).spawn(args.trials)
        channels += [(f"random channel #{i}", random_single_site_channel(code, np.random.default_rng(sq)))
                     for i, sq in enumerate(seeds)]

    def run(item):
        return recover(code, message, reference, [item[1]]).trace_distance

    with ThreadPoolExecutor(max_workers=max(args.jobs, 1)) as pool:
        dists = list(pool.map(run, channels))
    worst = max(dists)
    report.add("trials", [{"error": name, "trace_distance": d} for (name, _), d in zip(channels, dists)])
    report.check("worst recovery trace distance", worst, args.delta, worst <= args.delta + 1e-9)
    report.add("waiting_mass", p.waiting_mass)
    report.add("junk_weight", clean.junk_weight)
    report.add("trace_distance_no_error", clean.trace_distance)


# --- entry point ----------------------------------------------------------------


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=ATOL, help="equality tolerance")
    common.add_argument("--dense-cap", type=int, default=None, help="largest dense dimension")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--report", default=None, help="write the JSON report here instead of stdout")

    p = argparse.ArgumentParser(prog="clockforge", parents=[common])
    p.add_argument("--version", action="version", version=f"clockforge {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", parents=[common], help="dump a clock Hamiltonian as JSON terms")
    b.add_argument("--circuit", required=True)
    b.add_argument("--clock-dim", type=int, default=1)
    b.add_argument("--ordering", choices=("snake", "standard"), default="snake")
    b.add_argument("--no-out", action="store_true")
    b.add_argument("--no-in", action="store_true")
    b.add_argument("--checked", default=None, help="comma-separated input sites forced to |0>")
    b.add_argument("--output", default=None)

    s = sub.add_parser("spectrum", parents=[common], help="lowest eigenvalues of a clock Hamiltonian")
    s.add_argument("--circuit", required=True)
    s.add_argument("--clock-dim", type=int, default=1)
    s.add_argument("--ordering", choices=("snake", "standard"), default="snake")
    s.add_argument("--no-out", action="store_true")
    s.add_argument("--how-many", type=int, default=4)

    lc = sub.add_parser("lightcone", parents=[common], help="lightcone, effect zone and shadow")
    lc.add_argument("--circuit", required=True)
    lc.add_argument("--target", required=True, help="comma-separated sites")

    t = sub.add_parser("traceorder", parents=[common], help="trace-order identity for a history state")
    t.add_argument("--circuit", required=True)
    t.add_argument("--traced", default="")
    t.add_argument("--clock-dim", type=int, default=1)

    ln = sub.add_parser("lngs", parents=[common], help="qutrit line ground state checks")
    ln.add_argument("--n", type=int, default=8)
    ln.add_argument("--eps", type=float, default=1 / 60)
    ln.add_argument("--delta", type=float, default=0.02)
    ln.add_argument("--trials", type=int, default=500)
    ln.add_argument("--max-n", type=int, default=12)

    q = sub.add_parser("qlwc", parents=[common], help="approximate code recovery checks")
    q.add_argument("--inner", default="steane7")
    q.add_argument("--delta", type=float, default=0.5)
    q.add_argument("--error", default=None, help="kind:register:sites, e.g. erase:state:3")
    q.add_argument("--message", default="0")
    q.add_argument("--trials", type=int, default=100)
    return p


COMMANDS = {
    "build": cmd_build,
    "spectrum": cmd_spectrum,
    "lightcone": cmd_lightcone,
    "traceorder": cmd_traceorder,
    "lngs": cmd_lngs,
    "qlwc": cmd_qlwc,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    if args.dense_cap:
        os.environ["CLOCKFORGE_DENSE_CAP"] = str(args.dense_cap)
    report = Report(args, argv)
    try:
        COMMANDS[args.command](args, report)
    except UsageError as exc:
        print(f"clockforge {args.command}: {exc}", file=sys.stderr)
        return 2
    data = report.finish()
    if args.command == "build" and args.output:
        _emit(data, args.output)
    else:
        _emit(data, args.report)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
