"""Command-line interface: ``impact-curve {curve,check,compare,simulate,fig1,example1}``.

Exit codes: 0 success (all requested certificates hold), 2 some certificate
or reproduction check fails, 1 any error.
"""

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import chi2, cusum
from .config import example1_config, load_config
from .curves import CertificateKind, ConcavityCertificate, second_differences
from .montecarlo import simulate_chi2_false_alarms, simulate_cusum_false_alarms
from .simplex import LPSolveError
from .strategy import MixedStrategy, compare, convex_interval

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, str):
        return x
    return f"{float(x):.12g}"


def write_csv(path, header, rows):
    """Write rows with 12 significant digits; ``path`` of ``None`` or ``-`` means stdout."""
    if path in (None, "-"):
        fh, close = sys.stdout, False
    else:
        fh, close = open(path, "w", newline="", encoding="utf-8"), True
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    finally:
        if close:
            fh.close()


# -- argument resolution -------------------------------------------------------


def _load(args):
    return load_config(args.config) if getattr(args, "config", None) else None


def _detector_kind(args, cfg):
    if args.detector:
        return args.detector
    if cfg is not None and cfg.detector.get("kind"):
        return cfg.detector["kind"]
    return "chi2"


def _resolve_m(args, cfg):
    if cfg is not None:
        if args.m is not None and args.m != cfg.m:
            raise CliError(f"--m {args.m} does not match the config's {cfg.m} sensors")
        return cfg.m
    m = args.m if args.m is not None else None
    if m is None:
        raise CliError("pass --m or --config")
    if m < 1:
        raise CliError("--m must be >= 1")
    return m


def _cusum_params(args, cfg):
    """Return ``(b, delta, sigma_r)`` with flags overriding the config's detector block."""
    block = cfg.detector if cfg is not None else {}
    b = args.b if args.b is not None else None
    delta = args.delta if args.delta is not None else None
    if b is None and delta is None:
        b, delta = block.get("b"), block.get("delta")
    if (b is None) == (delta is None):
        raise CliError("CUSUM needs exactly one of --b or --delta")
    if args.sigma_r is not None:
        sigma_r = args.sigma_r
    elif "sigma_r" in block:
        sigma_r = float(block["sigma_r"])
    elif cfg is not None:
        sigma_r = cfg.sigma_r
    else:
        sigma_r = 1.0
    return b, delta, sigma_r


def _tau_grid(args, default_min=1.01, default_max=1000.0, default_points=400):
    lo = args.tau_min if args.tau_min is not None else default_min
    hi = args.tau_max if args.tau_max is not None else default_max
    n = args.points if args.points is not None else default_points
    if n < 1 or hi < lo or (n > 1 and hi == lo):
        raise CliError(f"empty tau grid: [{lo}, {hi}] with {n} points")
    if lo < 1:
        raise CliError("--tau-min must be >= 1")
    return np.geomspace(lo, hi, n)


def _alpha_grid(args):
    lo = args.alpha_min if args.alpha_min is not None else 1.0
    hi = args.alpha_max if args.alpha_max is not None else 10.0
    step = args.step if args.step is not None else 0.1
    if not step > 0:
        raise CliError("--step must be positive")
    if hi < lo or not lo > 0:
        raise CliError(f"empty alpha grid: [{lo}, {hi}]")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def _wants_alpha_grid(args):
    return any(v is not None for v in (args.alpha_min, args.alpha_max, args.step))


def _cusum_tau_min(args, b, delta, sigma_r):
    if args.tau_min is not None:
        return args.tau_min
    floor = cusum.delta_floor() if delta is not None else cusum.siegmund_floor(b, sigma_r)
    return max(1.01, 1.05 * floor)


# -- verbs ---------------------------------------------------------------------


def cmd_curve(args):
    cfg = _load(args)
    kind = _detector_kind(args, cfg)
    if kind == "chi2":
        m = _resolve_m(args, cfg)
        tau = _tau_grid(args)
        if cfg is None and args.constant_f is None:
            raise CliError("chi2 curves need --config or --constant-f")
        if args.constant_f is not None:
            curve = chi2.chi2_curve(tau, m, constant_f=args.constant_f, metric=args.metric)
        else:
            curve = chi2.chi2_curve(tau, m, attack_map=cfg.attack_map(), metric=args.metric)
    else:
        if cfg is None:
            raise CliError("CUSUM curves need --config (the impact LP uses the system)")
        b, delta, sigma_r = _cusum_params(args, cfg)
        amap = cfg.attack_map()
        if _wants_alpha_grid(args):
            curve = cusum.cusum_curve_from_alpha(amap, _alpha_grid(args), b=b, delta=delta, sigma_r=sigma_r)
        else:
            lo = _cusum_tau_min(args, b, delta, sigma_r)
            args.tau_min = lo
            curve = cusum.cusum_curve(amap, _tau_grid(args), b=b, delta=delta, sigma_r=sigma_r)
    write_csv(args.out, ["tau", "alpha", "impact"], zip(curve.tau, curve.alpha, curve.impact))
    if args.out not in (None, "-"):
        print(f"wrote {len(curve)} rows to {args.out}")
    return EXIT_OK


def _numerical_certificate(tau, alpha):
    d2 = second_differences(tau, alpha)
    return ConcavityCertificate(
        kind=CertificateKind.NUMERICAL_ONLY, tau=tau[1:-1], margins=-d2, holds=-d2 > 0
    )


def _check_chi2(args, cfg):
    m = _resolve_m(args, cfg)
    if args.thm2 and m % 2:
        raise CliError("Theorem 2 requires even m")
    use_thm2 = args.thm2 or m % 2 == 0
    tau = _tau_grid(args, default_min=1.05, default_max=100.0, default_points=40)
    alpha = np.array([chi2.threshold_from_tau(t, m) for t in tau])
    thm1 = chi2.theorem1_certificate(m, tau)
    tau_bar = chi2.theorem1_domain(m)
    if tau_bar is None:
        print(f"chi2 m={m}: sufficient interval is empty (m = 1)")
    else:
        print(f"chi2 m={m}: impact is concave on [1, {tau_bar:.12g}]")
    numeric = _numerical_certificate(tau, alpha)
    d2 = np.concatenate([[np.nan], -numeric.margins, [np.nan]])
    header = ["tau", "alpha", "thm1_margin", "d2alpha_fd"]
    cols = [tau, alpha, thm1.margins, d2]
    if use_thm2:
        thm2 = chi2.theorem2_certificate(m, tau)
        header += ["thm2_margin", "thm2_holds"]
        cols += [thm2.margins, thm2.holds]
        ok = thm2.all_hold
        fails = int(np.sum(~thm2.holds))
        print(f"local concavity test: {tau.size - fails}/{tau.size} points hold, "
              f"min margin {thm2.margins.min():.6g}")
    else:
        ok = numeric.all_hold
        fails = int(np.sum(~numeric.holds))
        print(f"numerical concavity of alpha(tau): {numeric.tau.size - fails}/{numeric.tau.size} "
              f"interior points concave")
    return ok, header, list(zip(*cols))


def _check_cusum(args, cfg):
    block = cfg.detector if cfg is not None else {}
    deltas = args.delta if args.delta is not None else ([block["delta"]] if "delta" in block and args.b is None else None)
    sigma_r = args.sigma_r if args.sigma_r is not None else float(block.get("sigma_r", cfg.sigma_r if cfg else 1.0))
    if deltas is not None and args.b is not None:
        raise CliError("pass either --b or --delta, not both")
    if deltas is not None:
        if args.tau_min is None:
            args.tau_min = max(1.5, 1.05 * cusum.delta_floor())
        tau = _tau_grid(args, default_max=1000.0, default_points=20)
        rows, ok = [], True
        for d in deltas:
            alpha = np.array([cusum.threshold_from_tau_delta(t, d, sigma_r) for t in tau])
            thm3 = cusum.theorem3_certificate(d, tau, sigma_r)
            exact = cusum.exact_inequality_certificate(d, tau, sigma_r)
            d2 = np.concatenate([[np.nan], second_differences(tau, alpha), [np.nan]])
            ok &= exact.all_hold
            print(f"delta={d:g}: sufficient test holds at {int(thm3.holds.sum())}/{tau.size}, "
                  f"exact inequality at {int(exact.holds.sum())}/{tau.size}")
            for i in range(tau.size):
                rows.append((d, tau[i], alpha[i], thm3.margins[i], thm3.holds[i],
                             -exact.margins[i], exact.holds[i], d2[i]))
        header = ["delta", "tau", "alpha", "thm3_margin", "thm3_holds", "exact_lhs", "exact_holds", "d2alpha_fd"]
        return ok, header, rows
    b = args.b if args.b is not None else block.get("b")
    if b is None:
        raise CliError("CUSUM check needs --b or --delta")
    m = args.m if args.m is not None else (cfg.m if cfg else 1)
    sig = cfg.controller.Sigma_r if (cfg is not None and args.sigma_r is None) else sigma_r
    if args.tau_min is None:
        args.tau_min = max(1.01, 1.05 * cusum.siegmund_floor(b, cusum._isotropic_sigma(sig, m)))
    tau = _tau_grid(args, default_max=1000.0, default_points=40)
    cert = cusum.proposition1_certificate(m, b, sig, tau)
    alpha = np.array([cusum.threshold_from_tau_siegmund(t, b, cert.params["sigma_r"]) for t in tau])
    print(f"shared threshold, m={m}, b={b:g}: d2alpha/dtau2 < 0 at {int(cert.holds.sum())}/{tau.size} points")
    header = ["tau", "alpha", "d2alpha", "holds"]
    return cert.all_hold, header, list(zip(tau, alpha, -cert.margins, cert.holds))


def cmd_check(args):
    cfg = _load(args)
    kind = _detector_kind(args, cfg)
    if kind == "chi2":
        ok, header, rows = _check_chi2(args, cfg)
    else:
        if args.thm2:
            raise CliError("--thm2 applies to the chi2 detector only")
        ok, header, rows = _check_cusum(args, cfg)
    if args.out:
        write_csv(args.out, header, rows)
    print("all certificates hold" if ok else "some certificates fail")
    return EXIT_OK if ok else EXIT_FAIL


def _compare_eval(args, cfg):
    if args.analytic == "sqrt":
        return math.sqrt
    if args.analytic == "linear":
        return lambda t: t
    kind = _detector_kind(args, cfg)
    if kind == "chi2":
        m = _resolve_m(args, cfg)
        if args.constant_f is not None:
            f = args.constant_f
        elif cfg is not None:
            f = chi2.f_of_H(cfg.attack_map())[0]
        else:
            raise CliError("chi2 compare needs --config, --constant-f or --analytic")
        power = 0.5 if args.metric == "norm" else 1.0
        return lambda t: f * chi2.threshold_from_tau(t, m) ** power
    if cfg is None:
        raise CliError("CUSUM compare needs --config")
    b, delta, sigma_r = _cusum_params(args, cfg)
    amap = cfg.attack_map()
    if delta is None:
        return lambda t: cusum.cusum_impact(amap, cusum.threshold_from_tau_siegmund(t, b, sigma_r), b)

    def ev(t):
        a = cusum.threshold_from_tau_delta(t, delta, sigma_r)
        return cusum.cusum_impact(amap, a, delta * a)

    return ev


def _print_comparison(res):
    for name in ("impact_low", "impact_high", "impact_mean", "tau_mean", "impact_at_tau_mean", "gain"):
        print(f"{name} = {getattr(res, name):.12g}")
    sign = "positive: randomizing helps" if res.gain > 0 else (
        "zero: no difference" if res.gain == 0 else "negative: static tuning is better")
    print(f"gain sign: {sign}")


def cmd_compare(args):
    cfg = _load(args)
    if args.tau1 is None or args.tau2 is None:
        raise CliError("compare needs --tau1 and --tau2")
    strategy = MixedStrategy(args.tau1, args.tau2, args.p)
    res = compare(_compare_eval(args, cfg), strategy)
    _print_comparison(res)
    return EXIT_OK


def cmd_simulate(args):
    cfg = _load(args)
    kind = _detector_kind(args, cfg)
    m = args.m if args.m is not None else (cfg.m if cfg else 1)
    if kind == "chi2":
        if args.alpha is None and args.tau is None:
            raise CliError("pass --alpha or --tau")
        alpha = args.alpha if args.alpha is not None else chi2.threshold_from_tau(args.tau, m)
        trials = args.trials or 100_000
        res = simulate_chi2_false_alarms(m, alpha, trials, args.seed)
        analytic = chi2.tau_from_threshold(alpha, m)
    else:
        block = cfg.detector if cfg is not None else {}
        b = args.b if args.b is not None else block.get("b")
        if b is None or args.delta is not None:
            raise CliError("CUSUM simulation needs a fixed --b")
        if args.sigma_r is not None:
            sigma_r = args.sigma_r
        else:
            sigma_r = float(block.get("sigma_r", cfg.sigma_r if cfg is not None else 1.0))
        if args.alpha is None:
            if args.tau is None:
                raise CliError("pass --alpha or --tau")
            alpha = cusum.threshold_from_tau_siegmund(args.tau, b, sigma_r)
        else:
            alpha = args.alpha
        trials = args.trials or 20_000
        res = simulate_cusum_false_alarms(m, alpha, b, sigma_r, trials, args.seed, sides=args.sides)
        analytic = cusum.siegmund_arl(alpha, b, sigma_r)
        if args.sides == "both":
            print("note: the analytic map models the one-sided run length; "
                  "the two-sided detector alarms about twice as often (try --sides upper)")
    print(f"detector = {kind}")
    print(f"alpha = {alpha:.12g}")
    for name in ("empirical_tau", "ci95_half_width"):
        print(f"{name} = {getattr(res, name):.12g}")
    print(f"trials = {res.trials}")
    print(f"horizon = {res.horizon}")
    print(f"seed = {res.seed}")
    print(f"analytic_tau = {analytic:.12g}")
    if math.isfinite(res.empirical_tau) and math.isfinite(analytic):
        rel = (res.empirical_tau - analytic) / analytic
        print(f"relative_deviation = {rel:.6g}")
        if res.ci95_half_width > 0:
            print(f"deviation_in_ci_half_widths = {(res.empirical_tau - analytic) / res.ci95_half_width:.6g}")
    return EXIT_OK


def cmd_fig1(args):
    os.makedirs(args.out, exist_ok=True)
    tau = _tau_grid(args, default_min=1.05, default_max=100.0, default_points=400)
    f = args.constant_f if args.constant_f is not None else 10.1
    curves = {}
    for m in (1, 2):
        c = chi2.chi2_curve(tau, m, constant_f=f, metric=args.metric)
        curves[m] = c
        path = os.path.join(args.out, f"fig1_m{m}.csv")
        write_csv(path, ["tau", "alpha", "impact"], zip(c.tau, c.alpha, c.impact))
        print(f"wrote {path}")
    d2_m2 = curves[2].second_differences()
    concave = bool(np.all(d2_m2 <= 1e-7))
    print(f"m=2: max second difference {d2_m2.max():.6g} ({'concave' if concave else 'NOT concave'})")
    run = convex_interval(curves[1])
    if run is None:
        print("m=1: no convex region found")
        return EXIT_FAIL
    print(f"m=1: convex on [{run[0]:.12g}, {run[1]:.12g}]")
    p = args.p if args.p is not None else 0.5
    strategy = MixedStrategy(run[0], run[1], p)
    power = 0.5 if args.metric == "norm" else 1.0
    gains = {}
    for m in (2, 1):
        print(f"-- m={m}, tau1={run[0]:.12g}, tau2={run[1]:.12g}, p={p:g}")
        res = compare(lambda t, m=m: f * chi2.threshold_from_tau(t, m) ** power, strategy)
        _print_comparison(res)
        gains[m] = res.gain
    ok = concave and gains[2] > 0 and gains[1] < 0
    return EXIT_OK if ok else EXIT_FAIL


def cmd_example1(args):
    cfg = load_config(args.config) if args.config else example1_config()
    os.makedirs(args.out, exist_ok=True)
    amap = cfg.attack_map()
    sigma_r = args.sigma_r if args.sigma_r is not None else cfg.sigma_r
    alpha = _alpha_grid(args)
    rows = []
    print(f"N={amap.N}, {alpha.size} thresholds in [{alpha[0]:g}, {alpha[-1]:g}]")
    for b in args.b or [0.5, 1.0, 2.0]:
        curve = cusum.cusum_curve_from_alpha(amap, alpha, b=b, sigma_r=sigma_r)
        probe = cusum.affine_fit(curve.alpha, curve.impact)
        rel = probe.max_fit_residual / max(curve.impact.max(), 1e-300)
        print(f"b={b:g}: slope {probe.slope:.12g}, intercept {probe.intercept:.12g}, "
              f"fit residual / max impact {rel:.3g}, max |second difference| "
              f"{np.abs(probe.second_derivatives).max():.3g}")
        rows.extend((b, a, t, i) for a, t, i in zip(curve.alpha, curve.tau, curve.impact))
    path = os.path.join(args.out, "example1_impact.csv")
    write_csv(path, ["b", "alpha", "tau", "impact"], rows)
    print(f"wrote {path}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def _add_common(p, detector=True):
    p.add_argument("--config", help="JSON system description")
    if detector:
        p.add_argument("--detector", choices=("chi2", "cusum"))
    p.add_argument("--m", type=int, help="number of sensors")


def _add_tau_grid(p):
    p.add_argument("--tau-min", type=float)
    p.add_argument("--tau-max", type=float)
    p.add_argument("--points", type=int)


def _add_alpha_grid(p):
    p.add_argument("--alpha-min", type=float)
    p.add_argument("--alpha-max", type=float)
    p.add_argument("--step", type=float)


def _add_cusum(p, multi_delta=False):
    p.add_argument("--b", type=float, help="CUSUM bias (fixed)")
    if multi_delta:
        p.add_argument("--delta", type=float, nargs="+", help="bias ratio(s), b = delta * alpha")
    else:
        p.add_argument("--delta", type=float, help="bias ratio, b = delta * alpha")
    p.add_argument("--sigma-r", type=float, help="per-sensor residual standard deviation")


def build_parser():
    parser = _Parser(prog="impact-curve", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("curve", help="impact versus mean time between false alarms, as CSV")
    _add_common(p)
    _add_tau_grid(p)
    _add_alpha_grid(p)
    _add_cusum(p)
    p.add_argument("--constant-f", type=float, help="use this f instead of f(H) (chi2)")
    p.add_argument("--metric", choices=("norm", "squared"), default="norm")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("check", help="concavity certificates")
    _add_common(p)
    _add_tau_grid(p)
    _add_cusum(p, multi_delta=True)
    p.add_argument("--thm2", action="store_true", help="require the even-m local test (chi2)")
    p.add_argument("--out", help="CSV report path")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compare", help="mixed two-threshold strategy versus static tuning")
    _add_common(p)
    _add_cusum(p)
    p.add_argument("--constant-f", type=float)
    p.add_argument("--metric", choices=("norm", "squared"), default="norm")
    p.add_argument("--analytic", choices=("sqrt", "linear"), help="use I(tau) = sqrt(tau) or tau")
    p.add_argument("--tau1", type=float)
    p.add_argument("--tau2", type=float)
    p.add_argument("--p", type=float, default=0.5)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="Monte Carlo false-alarm run lengths")
    _add_common(p)
    _add_cusum(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float, help="target tau; the threshold is read off the analytic map")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sides", choices=("both", "upper"), default="both")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fig1", help="two chi2 curves (m = 1, 2) and a strategy comparison")
    _add_tau_grid(p)
    p.add_argument("--constant-f", type=float)
    p.add_argument("--metric", choices=("norm", "squared"), default="squared")
    p.add_argument("--p", type=float)
    p.add_argument("--out", default="fig1")
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("example1", help="CUSUM impact versus threshold for the bundled example system")
    p.add_argument("--config", help="override the bundled system")
    _add_alpha_grid(p)
    p.add_argument("--b", type=float, nargs="+", help="fixed biases (default 0.5 1 2)")
    p.add_argument("--sigma-r", type=float)
    p.add_argument("--out", default="example1")
    p.set_defaults(func=cmd_example1)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, LPSolveError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
