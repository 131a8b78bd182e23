"""Command-line front door: deterministic experiment runs emitting CSV/JSON.

Configuration is a flat key=value file plus --key value overrides.  Exit codes:
0 all checks pass, 2 a scientific check failed, 64 configuration error.
Identical config and seed produce byte-identical output; floats print with 17
significant digits.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from .alpert import build_alpert
from .dyadic import DyadicCube, GridTruncation, root_cube
from .frame_op import (
    assemble,
    deviation,
    frame_ratio_experiment,
    halo_square_ratio,
    reproduce,
    standard_test_set,
)
from .mollifier import build_mollifier
from .polybasis import gauss_rule, multi_indices
from .smooth_wavelet import (
    SmoothWavelet,
    grad_sup_estimate,
    smooth_inner_block,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 2
EXIT_CONFIG = 64

_L_CAP = {1: 6, 2: 4, 3: 3}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 1
    kappa: int = 2
    L: int = 3
    m: int | None = None
    betas: tuple[int, ...] = (3, 4, 5, 6)
    ps: tuple[float, ...] = (1.5, 2.0, 3.0)
    tol: float = 1e-8
    max_iter: int = 400
    seed: int = 20240801
    out: str = "alpertlab_out"
    test_set: tuple[str, ...] = (
        "random_expansion",
        "ball_indicator",
        "gaussian_bump",
        "single_wavelet",
    )

    @property
    def etas(self) -> tuple[float, ...]:
        return tuple(2.0 ** -b for b in self.betas)

    @property
    def mollifier_m(self) -> int:
        return self.m if self.m is not None else self.kappa + 4

    def validate(self) -> None:
        if self.n not in (1, 2, 3):
            raise ConfigError(f"n must be 1, 2 or 3, got {self.n}")
        if not 1 <= self.kappa <= 6:
            raise ConfigError(f"kappa must lie in 1..6, got {self.kappa}")
        if not 0 <= self.L <= _L_CAP[self.n]:
            raise ConfigError(f"L must lie in 0..{_L_CAP[self.n]} for n={self.n}")
        if self.mollifier_m < 1:
            raise ConfigError("mollifier exponent m must be >= 1")
        if not self.betas or any(b < 1 for b in self.betas):
            raise ConfigError("every eta must be 2^-beta with integer beta >= 1")
        if any(not 1.0 < p < math.inf for p in self.ps):
            raise ConfigError("every p must lie in (1, inf)")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")


def _parse_eta_token(tok: str) -> int:
    tok = tok.strip()
    if "^" in tok:
        base, exp = tok.split("^")
        if base.strip() != "2":
            raise ConfigError(f"eta tokens use base 2, got {tok!r}")
        beta = -int(exp)
    else:
        val = float(tok)
        if val <= 0 or val >= 1:
            raise ConfigError(f"eta {tok!r} outside (0, 1)")
        beta_f = -math.log2(val)
        beta = round(beta_f)
        if abs(beta_f - beta) > 1e-12:
            raise ConfigError(f"eta {tok!r} is not a power of two")
    if beta < 1:
        raise ConfigError(f"eta {tok!r} must be < 1")
    return beta


_KEYS = {"n", "kappa", "L", "m", "eta", "p", "tol", "max_iter", "seed", "out", "test_set"}


def config_from_pairs(pairs: dict[str, str]) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for key, val in pairs.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if key in ("n", "kappa", "L", "m", "max_iter", "seed"):
            try:
                cfg = replace(cfg, **{key: int(val)})
            except ValueError as e:
                raise ConfigError(f"{key} must be an integer, got {val!r}") from e
        elif key == "tol":
            cfg = replace(cfg, tol=float(val))
        elif key == "eta":
            toks = [t for t in val.split(",") if t.strip()]
            cfg = replace(cfg, betas=tuple(_parse_eta_token(t) for t in toks))
        elif key == "p":
            cfg = replace(cfg, ps=tuple(float(t) for t in val.split(",") if t.strip()))
        elif key == "out":
            cfg = replace(cfg, out=val.strip())
        elif key == "test_set":
            names = tuple(t.strip() for t in val.split(",") if t.strip())
            cfg = replace(cfg, test_set=names)
    cfg.validate()
    return cfg


def load_config_file(path: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line without '=': {line!r}")
            key, val = line.split("=", 1)
            pairs[key.strip()] = val.strip()
    return pairs


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _cube_label(cube: DyadicCube) -> str:
    return ";".join(str(j) for j in cube.index)


def _fit_slope(xs, ys) -> float:
    xs = np.log2(np.asarray(xs, dtype=float))
    ys = np.log2(np.maximum(np.asarray(ys, dtype=float), 1e-300))
    return float(np.polyfit(xs, ys, 1)[0])


# ---------------------------------------------------------------------------
# verify-wavelets


def cmd_verify_wavelets(cfg: ExperimentConfig) -> int:
    from .smooth_wavelet import smooth_moment_block, smooth_norm_block, support_violation

    n, kappa, L = cfg.n, cfg.kappa, cfg.L
    spec = build_mollifier(n, kappa, cfg.mollifier_m)
    trunc = GridTruncation(n, L)
    eta = max(cfg.etas)
    rows: list[list] = []
    ok = True
    rng = np.random.default_rng(cfg.seed)
    for k in range(L + 1):
        for Q in trunc.cubes_at_level(k):
            ws = build_alpert(Q, kappa)
            norms, moments = _plain_wavelet_checks(Q, kappa)
            sup = support_violation(Q, "wavelet", kappa, eta, spec, rng, samples=10_000)
            smo = smooth_moment_block(Q, "wavelet", kappa, eta, spec)
            drift = np.abs(smooth_norm_block(Q, "wavelet", kappa, eta, spec) - 1.0)
            for a in range(ws.size):
                val = abs(norms[a] - 1.0)
                ok &= val <= 1e-10
                rows.append([k, _cube_label(Q), a, "unit_norm", val, 1e-10, val <= 1e-10])
                for alpha, mv in zip(multi_indices(n, kappa), moments[a]):
                    lbl = "moment_h:" + "".join(str(x) for x in alpha)
                    ok &= abs(mv) <= 1e-8
                    rows.append([k, _cube_label(Q), a, lbl, abs(mv), 1e-8, abs(mv) <= 1e-8])
                ok &= sup[a] <= 1e-12
                rows.append([k, _cube_label(Q), a, "support_eta", sup[a], 1e-12, sup[a] <= 1e-12])
                for alpha, mv in zip(multi_indices(n, kappa), smo[a]):
                    lbl = "moment_h_eta:" + "".join(str(x) for x in alpha)
                    ok &= abs(mv) <= 1e-8
                    rows.append([k, _cube_label(Q), a, lbl, abs(mv), 1e-8, abs(mv) <= 1e-8])
                bound = 2.0 * eta
                ok &= drift[a] <= bound
                rows.append([k, _cube_label(Q), a, "norm_drift", drift[a], bound, drift[a] <= bound])
    # derivative scaling on the root wavelet (scale covariance carries it over)
    for order in (0, 1):
        ests = []
        for e in cfg.etas:
            sw = SmoothWavelet(trunc.root, 0, kappa, e, spec)
            ests.append(grad_sup_estimate(sw, order))
        slope = _fit_slope([1.0 / e for e in cfg.etas], ests)
        good = abs(slope - order) <= 0.2
        ok &= good
        rows.append([0, _cube_label(trunc.root), 0, f"gradsup_slope_m{order}", slope, 0.2, good])
    write_csv(os.path.join(cfg.out, "verify_wavelets.csv"),
              ["level", "cube", "index", "check", "value", "bound", "pass"], rows)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _plain_wavelet_checks(Q: DyadicCube, kappa: int):
    from .dyadic import children

    n = Q.dim
    ws = build_alpert(Q, kappa)
    rules = [gauss_rule(kappa + 4, c.lower, c.upper) for c in children(Q)]
    pts = np.concatenate([r.points for r in rules])
    wts = np.concatenate([r.weights for r in rules])
    vals = ws.eval_all(pts).T  # (nf, N)
    norms = np.sqrt(np.sum(vals ** 2 * wts, axis=1))
    idx = multi_indices(n, kappa)
    mono = np.stack([np.prod(pts ** np.array(al), axis=1) for al in idx], axis=0)
    moments = vals @ (mono * wts).T  # (nf, d)
    return norms, moments




# ---------------------------------------------------------------------------
# inner-decay


def _decay_cases(cfg: ExperimentConfig):
    """Pair geometries per case; windows avoid the crossover contamination at
    the ends of each scale range (measured ahead of time)."""
    n = cfg.n
    corner = lambda t: DyadicCube(t, (0,) * n)
    root = root_cube(n)
    cases = {}
    cases["diagonal"] = {"expected": 1.0, "sweep": "eta",
                         "pairs": [(root, root, 2.0 ** -b) for b in cfg.betas]}
    sib = (DyadicCube(1, (0,) * n), DyadicCube(1, tuple([1] + [0] * (n - 1))))
    cases["sibling"] = {"expected": 1.0, "sweep": "eta",
                        "pairs": [(sib[0], sib[1], 2.0 ** -b) for b in cfg.betas]}
    eta_i = 2.0 ** -4
    trange = range(2, 7) if n == 1 else range(2, 5)
    cases["carleson_small_i"] = {
        "expected": n / 2 + 1, "sweep": "ratio",
        "pairs": [(corner(t), root, eta_i) for t in trange],
    }
    eta_q = 2.0 ** -8 if n == 1 else 2.0 ** -5
    trange = range(2, 6) if n == 1 else range(1, 4)
    cases["carleson_small_q"] = {
        "expected": n / 2 - 1, "sweep": "ratio", "swap": True,
        # exponent 0 at n=2: recorded, not asserted
        "assert": n != 2,
        "pairs": [(root, corner(t), eta_q) for t in trange],
    }
    eta_t = 2.0 ** -2
    delta = eta_t
    trange = range(5, 9) if n == 1 else range(3, 6)
    tiny = []
    for t in trange:
        side = 2.0 ** -t
        # offset delta/4 from the midpoint face: inside the half-width halo
        # neighbourhood, clear of the parity cancellation exactly on the face
        pos = 0.5 + delta / 4.0
        idx = tuple([int(pos / side)] + [int(0.3 / side)] * (n - 1))
        Qt = DyadicCube(t, idx)
        from .dyadic import faces_box_distance_sq, skeleton_faces

        assert faces_box_distance_sq(skeleton_faces(root), Qt.lower, Qt.upper) < (
            0.5 * eta_t * root.side
        ) ** 2, "tiny cube must meet the half-width halo neighbourhood"
        tiny.append((root, Qt, eta_t))
    cases["nested_tiny_q"] = {"expected": cfg.kappa + n / 2, "sweep": "ratio",
                              "swap": True, "pairs": tiny}
    far = DyadicCube(2, tuple([2] + [0] * (n - 1)))
    interior = DyadicCube(3, (1,) * n)  # clear of every skeleton face
    cases["zero"] = {"expected": 0.0, "sweep": "zero",
                     "pairs": [(corner(2), far, 2.0 ** -4), (root, interior, 2.0 ** -4)]}
    return cases


def cmd_inner_decay(cfg: ExperimentConfig) -> int:
    n, kappa = cfg.n, cfg.kappa
    spec = build_mollifier(n, kappa, cfg.mollifier_m)
    rows: list[list] = []
    ok = True
    # calibrated: relative block error ~7e-4 at this quality, invisible to the
    # +-0.25 slope checks
    quality = {} if n == 1 else {"cell_frac": 1.0, "g_cell": 4}
    for case, info in _decay_cases(cfg).items():
        xs, vals = [], []
        for I, Q, eta in info["pairs"]:
            B = smooth_inner_block(I, Q, eta, kappa, spec, **quality)
            if I == Q:
                v = float(np.max(np.abs(B - np.eye(B.shape[0]))))
            else:
                v = float(np.max(np.abs(B)))
            small, big = (Q, I) if info.get("swap") else (I, Q)
            ratio = small.side / big.side
            xs.append(eta if info["sweep"] == "eta" else ratio)
            vals.append(v)
        if info["sweep"] == "zero":
            passed = all(v == 0.0 for v in vals)
            slope = 0.0
        else:
            slope = _fit_slope(xs, vals)
            passed = abs(slope - info["expected"]) <= 0.25
        asserted = info.get("assert", True)
        if asserted:
            ok &= passed
        for (I, Q, eta), x, v in zip(info["pairs"], xs, vals):
            beta = int(round(-math.log2(eta)))
            rows.append([case, kappa, beta, eta, x, v, slope, info["expected"],
                         passed if asserted else ""])
    write_csv(os.path.join(cfg.out, "inner_decay.csv"),
              ["case", "kappa", "beta", "eta", "ratio", "value", "slope", "expected", "pass"],
              rows)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# frame


def cmd_frame(cfg: ExperimentConfig) -> int:
    n, kappa, L = cfg.n, cfg.kappa, cfg.L
    spec = build_mollifier(n, kappa, cfg.mollifier_m)
    trunc = GridTruncation(n, L)
    tests = [t for t in standard_test_set(trunc, kappa, cfg.seed) if t[0] in cfg.test_set]
    rows: list[list] = []
    devs: dict[int, float] = {}
    residuals: dict[str, dict] = {}
    for beta in sorted(cfg.betas):
        eta = 2.0 ** -beta
        fm = assemble(trunc, eta, kappa, spec)
        dev = deviation(fm)
        dev_tr = deviation(fm.matrix.T)
        devs[beta] = dev
        rows.append([beta, eta, "deviation", "", "", dev])
        rows.append([beta, eta, "deviation_transpose", "", "", dev_tr])
        if dev >= 1.0:
            continue
        for name, f, in_span in tests:
            out = reproduce(f, trunc, eta, kappa, tol=cfg.tol, max_iter=cfg.max_iter,
                            ps=tuple(p for p in cfg.ps if p != 2.0), fm=fm, spec=spec)
            rows.append([beta, eta, "neumann_iters", name, "", out["iterations"]])
            rows.append([beta, eta, "residual", name, 2.0, out["residual_l2"]])
            residuals.setdefault(name, {})[beta] = out["residual_l2"]
            for p, v in out["residual_lp"].items():
                rows.append([beta, eta, "residual", name, p, v])
        for p in cfg.ps:
            ratios = frame_ratio_experiment(tests, p, eta, trunc, kappa,
                                            variant="plain" if p == 2.0 else "smooth",
                                            spec=spec)
            for r in ratios:
                rows.append([beta, eta, "square_ratio", r["f"], p, r["ratio"]])
    eta0 = max((2.0 ** -b for b, d in devs.items() if d < 0.5), default=None)
    for row in rows:
        if row[2] == "deviation":
            row_eta = row[1]
            row.append(1 if (eta0 is not None and row_eta <= eta0) else 0)
        else:
            row.append("")
    write_csv(os.path.join(cfg.out, "frame.csv"),
              ["beta", "eta", "metric", "f", "p", "value", "eta0_ok"], rows)
    summary = {
        "n": n, "kappa": kappa, "L": L, "m": cfg.mollifier_m,
        "eta_list": list(cfg.etas),
        "eta0_measured": eta0,
        "deviations": {str(b): devs[b] for b in sorted(devs)},
        "residuals": {name: {str(b): v for b, v in sorted(res.items())}
                      for name, res in residuals.items()},
    }
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "frame_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK if any(d < 1.0 for d in devs.values()) else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# marcin


def gamma_p(p: float) -> float:
    if p > 2.0:
        return 1.0 / (2.0 * (p - 1.0))
    if p == 2.0:
        return 0.5
    return (p - 1.0) / (p * (3.0 - p))


def cmd_marcin(cfg: ExperimentConfig) -> int:
    if not cfg.test_set:
        raise ConfigError("marcin needs a nonempty test set")
    n, kappa, L = cfg.n, cfg.kappa, cfg.L
    trunc = GridTruncation(n, L)
    tests = [t for t in standard_test_set(trunc, kappa, cfg.seed) if t[0] in cfg.test_set]
    if not tests:
        raise ConfigError("test_set matched no known test functions")
    rows: list[list] = []
    ok = True
    from .alpert import expand
    from .frame_op import FunctionSample, square_function

    for p in cfg.ps:
        gp = gamma_p(p)
        for name, f, _ in tests:
            ratios = []
            for beta in sorted(cfg.betas):
                eta = 2.0 ** -beta
                if p == 2.0:
                    ratio = halo_square_ratio(f, trunc, kappa, eta)
                else:
                    expn = expand(f, trunc, kappa)
                    sq = lambda X: square_function(expn, X, "halo", eta=eta)
                    num = FunctionSample(sq, trunc).lp(p)
                    den = FunctionSample(f, trunc).lp(p)
                    ratio = num / den
                ratios.append((beta, eta, ratio))
            fitted = _fit_slope([e for _, e, _ in ratios], [max(r, 1e-300) for _, _, r in ratios])
            for beta, eta, ratio in ratios:
                if p == 2.0:
                    bound = math.sqrt(eta)
                    passed = ratio <= bound
                    ok &= passed
                    rows.append([p, beta, eta, name, ratio, bound, passed, fitted, gp])
                else:
                    rows.append([p, beta, eta, name, ratio, "", "", fitted, gp])
    write_csv(os.path.join(cfg.out, "marcin.csv"),
              ["p", "beta", "eta", "f", "ratio", "bound", "pass", "fitted_exponent", "gamma_p"],
              rows)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# entry point

_COMMANDS = {
    "verify-wavelets": cmd_verify_wavelets,
    "inner-decay": cmd_inner_decay,
    "frame": cmd_frame,
    "marcin": cmd_marcin,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="alpertlab",
        description="numerical experiments for smooth Alpert wavelet frames",
    )
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--out", help="output directory")
    args, leftover = parser.parse_known_args(argv)
    try:
        pairs: dict[str, str] = {}
        if args.config:
            pairs.update(load_config_file(args.config))
        if len(leftover) % 2 != 0:
            raise ConfigError(f"overrides must be --key value pairs, got {leftover!r}")
        for flag, val in zip(leftover[::2], leftover[1::2]):
            if not flag.startswith("--"):
                raise ConfigError(f"unexpected argument {flag!r}")
            pairs[flag[2:]] = val
        if args.out:
            pairs["out"] = args.out
        cfg = config_from_pairs(pairs)
    except (ConfigError, OSError) as exc:
        print(f"alpertlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        code = _COMMANDS[args.subcommand](cfg)
    except ConfigError as exc:
        print(f"alpertlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return code


if __name__ == "__main__":
    sys.exit(main())
