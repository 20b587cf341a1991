"""Config-driven batch CLI: build states, run verification suites, scan grids.

One JSON config file describes the physics, the family label, cutoffs,
quadrature orders, and tolerances; the subcommands consume it:

    landaucs build  --config cfg.json --out outdir
    landaucs verify --config cfg.json --out outdir [--which norm identity ...]
    landaucs scan   --config cfg.json --out outdir

Exit codes: 0 all requested checks pass, 1 a verification failed, 2 the
config (or parameter bundle) is invalid.  Identical configs produce
byte-identical outputs; nothing here consults clocks or RNGs.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._kernels import NUMBA_ACTIVE, active_backend
from .dynamics import (
    HamiltonianKind,
    HamiltonianSpec,
    check_temporal_stability,
    expectation_energy,
    hamiltonian_for,
)
from .errors import ConfigError, ConvergenceDomainError, LandauCSError, ValidationError
from .fockspace import BasisCutoffs, inner_product
from .measures import (
    AngularExact,
    AngularTrapezoid,
    QuadratureConfig,
    ladder_measure,
    moment_check,
    resolve_identity,
)
from .spectrum import AlphaSequence, PhysicalParams, Regime, ValidatedBundle, validate
from .states import (
    BiCoherentLabel,
    BuildResult,
    FamilyLabel,
    OneDOFLabel,
    ThreeDOFDependentLabel,
    ThreeDOFIndependentLabel,
    TwoDOFLabel,
    build,
)

DEFAULT_TOLERANCES = {
    "norm": 1e-10,
    "identity": 1e-8,
    "stability": 1e-10,
    "action": 1e-8,
    "moments": 1e-10,
}

ALL_CHECKS = ("norm", "identity", "stability", "action", "moments")

ACTION_NOT_APPLICABLE = (
    "not applicable: the lowest shifted level of this family is nonzero, "
    "so its energy expectation cannot be proportional to the action label"
)


@dataclass
class RunConfig:
    params: PhysicalParams
    alpha: AlphaSequence | None
    family: str
    family_spec: dict
    cutoffs: BasisCutoffs | None
    tail_tol: float
    strict_radius: bool
    quad: QuadratureConfig
    tolerances: dict
    stability_times: list
    checks: list
    dump_matrix: bool
    scan: dict | None
    seed: int
    threads: int = 1
    _bundle: ValidatedBundle | None = field(default=None, repr=False)

    def bundle(self) -> ValidatedBundle | None:
        if self._bundle is None and self.alpha is not None:
            self._bundle = validate(self.params, self.alpha)
        return self._bundle

    def label(self, overrides: dict | None = None) -> FamilyLabel:
        spec = dict(self.family_spec)
        if overrides:
            spec.update(overrides)
        return _parse_label(self.family, spec, self)

    def build_state(self, overrides: dict | None = None,
                    tail_tol: float | None = "default") -> BuildResult:
        tol = self.tail_tol if tail_tol == "default" else tail_tol
        label = self.label(overrides)
        return build(
            label,
            bundle=self.bundle(),
            params=self.params,
            alpha_k=self.family_spec.get("alpha_k"),
            cutoffs=self.cutoffs,
            tail_tol=tol,
            strict_radius=self.strict_radius,
        )


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"{where}: missing required key '{key}'")
    return mapping[key]


def _as_float(value, where: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return int(value)


def _parse_params(raw: dict) -> PhysicalParams:
    known = {"m": "m", "omega_c": "omega_c", "lambda": "lam", "hbar": "hbar"}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"params.{key}: unknown key")
        kwargs[known[key]] = _as_float(value, f"params.{key}")
    try:
        return PhysicalParams(**kwargs)
    except LandauCSError as exc:
        raise ConfigError(f"params: {exc}") from None


def _parse_alpha(raw: dict | None, params: PhysicalParams) -> AlphaSequence | None:
    if raw is None:
        return None
    mode = _require(raw, "mode", "alpha")
    if mode == "linear_nonpositive":
        return AlphaSequence.linear_nonpositive(
            step=_as_float(_require(raw, "step", "alpha"), "alpha.step"),
            count=_as_int(_require(raw, "count", "alpha"), "alpha.count"),
        )
    if mode == "linear_shifted":
        return AlphaSequence.linear_shifted(
            alpha0=_as_float(_require(raw, "alpha0", "alpha"), "alpha.alpha0"),
            step=_as_float(_require(raw, "step", "alpha"), "alpha.step"),
            count=_as_int(_require(raw, "count", "alpha"), "alpha.count"),
            n_ref=_as_int(_require(raw, "n_ref", "alpha"), "alpha.n_ref"),
            params=params,
        )
    if mode == "explicit":
        regime = _require(raw, "regime", "alpha")
        try:
            regime = Regime(regime)
        except ValueError:
            raise ConfigError(f"alpha.regime: unknown regime {regime!r}") from None
        values = _require(raw, "values", "alpha")
        if not isinstance(values, list) or not values:
            raise ConfigError("alpha.values: expected a non-empty list")
        return AlphaSequence(
            values=tuple(_as_float(v, f"alpha.values[{i}]") for i, v in enumerate(values)),
            regime=regime,
            n_ref=_as_int(raw.get("n_ref", 0), "alpha.n_ref"),
            eps_limit=raw.get("eps_limit"),
        )
    raise ConfigError(f"alpha.mode: unknown mode {mode!r}")


def _parse_label(family: str, spec: dict, cfg: RunConfig) -> FamilyLabel:
    get_f = lambda key, default=0.0: _as_float(spec.get(key, default), f"family.{key}")
    get_i = lambda key, default=0: _as_int(spec.get(key, default), f"family.{key}")
    try:
        if family == "one_dof":
            return OneDOFLabel(K=get_f("K"), delta=get_f("delta"),
                               n=get_i("n"), l=get_i("l"))
        if family == "two_dof":
            return TwoDOFLabel(J=get_f("J"), theta=get_f("theta"),
                               Jp=get_f("Jp"), thetap=get_f("thetap"),
                               l=get_i("l"), k=get_i("k"))
        if family == "three_dof_independent":
            fixed = spec.get("fixed", "l")
            return ThreeDOFIndependentLabel(
                J=get_f("J"), theta=get_f("theta"), Jp=get_f("Jp"),
                thetap=get_f("thetap"), K=get_f("K"), delta=get_f("delta"),
                fixed=fixed, index=get_i("index"))
        if family == "three_dof_dependent":
            return ThreeDOFDependentLabel(
                J=get_f("J"), theta=get_f("theta"), Jp=get_f("Jp"),
                thetap=get_f("thetap"), K=get_f("K"), delta=get_f("delta"),
                l=get_i("l"))
        if family == "bicoherent":
            k = spec.get("k", 0)
            k = None if k is None else _as_int(k, "family.k")
            if "z" in spec or "zp" in spec:
                z = spec.get("z", [0.0, 0.0])
                zp = spec.get("zp", [0.0, 0.0])
                for name, v in (("z", z), ("zp", zp)):
                    if not (isinstance(v, list) and len(v) == 2):
                        raise ConfigError(f"family.{name}: expected [re, im]")
                return BiCoherentLabel(z=complex(z[0], z[1]), zp=complex(zp[0], zp[1]), k=k)
            return BiCoherentLabel.from_angles(
                J=get_f("J"), theta=get_f("theta"),
                Jp=get_f("Jp"), thetap=get_f("thetap"), k=k)
    except LandauCSError as exc:
        raise ConfigError(f"family: {exc}") from None
    raise ConfigError(f"family.variant: unknown variant {family!r}")


def _parse_cutoffs(raw) -> BasisCutoffs | None:
    if raw is None:
        return None
    try:
        return BasisCutoffs(
            n_max=_as_int(_require(raw, "n_max", "cutoffs"), "cutoffs.n_max"),
            l_max=_as_int(_require(raw, "l_max", "cutoffs"), "cutoffs.l_max"),
            k_max=_as_int(_require(raw, "k_max", "cutoffs"), "cutoffs.k_max"),
        )
    except LandauCSError as exc:
        raise ConfigError(f"cutoffs: {exc}") from None


def _parse_quadrature(raw: dict | None) -> QuadratureConfig:
    raw = raw or {}
    angular_name = raw.get("angular", "exact")
    if angular_name == "exact":
        angular = AngularExact()
    elif angular_name == "trapezoid":
        angular = AngularTrapezoid(points=_as_int(raw.get("angular_points", 128),
                                                  "quadrature.angular_points"))
    else:
        raise ConfigError(f"quadrature.angular: unknown rule {angular_name!r}")
    try:
        return QuadratureConfig(
            j_order=_as_int(raw.get("j_order", 64), "quadrature.j_order"),
            jp_order=_as_int(raw.get("jp_order", 64), "quadrature.jp_order"),
            k_nodes=_as_int(raw.get("k_nodes", 10), "quadrature.k_nodes"),
            angular=angular,
        )
    except LandauCSError as exc:
        raise ConfigError(f"quadrature: {exc}") from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")

    params = _parse_params(raw.get("params", {}))
    alpha = _parse_alpha(raw.get("alpha"), params)
    family_raw = _require(raw, "family", "config")
    family = _require(family_raw, "variant", "family")
    family_spec = {k: v for k, v in family_raw.items() if k != "variant"}

    tolerances = dict(DEFAULT_TOLERANCES)
    for key, value in (raw.get("tolerances") or {}).items():
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"tolerances.{key}: unknown tolerance")
        tolerances[key] = _as_float(value, f"tolerances.{key}")

    checks = raw.get("checks", list(ALL_CHECKS))
    for c in checks:
        if c not in ALL_CHECKS:
            raise ConfigError(f"checks: unknown check {c!r}")

    scan = raw.get("scan")
    if scan is not None:
        _require(scan, "parameter", "scan")
        values = _require(scan, "values", "scan")
        if not isinstance(values, list):
            raise ConfigError("scan.values: expected a list")

    cfg = RunConfig(
        params=params,
        alpha=alpha,
        family=family,
        family_spec=family_spec,
        cutoffs=_parse_cutoffs(raw.get("cutoffs")),
        tail_tol=_as_float(raw.get("tail_tol", 1e-12), "tail_tol"),
        strict_radius=bool(raw.get("strict_radius", False)),
        quad=_parse_quadrature(raw.get("quadrature")),
        tolerances=tolerances,
        stability_times=[_as_float(t, "stability_times") for t in
                         raw.get("stability_times", [0.1, 1.0, 10.0])],
        checks=list(checks),
        dump_matrix=bool(raw.get("dump_matrix", False)),
        scan=scan,
        seed=_as_int(raw.get("seed", 0), "seed"),
    )
    # parse the label once so field errors surface as config errors
    cfg.label()
    return cfg


def _label_dict(label: FamilyLabel) -> dict:
    if isinstance(label, BiCoherentLabel):
        return {
            "z": [label.z.real, label.z.imag],
            "zp": [label.zp.real, label.zp.imag],
            "k": label.k,
        }
    out = {}
    for key, value in vars(label).items():
        out[key] = value
    return out


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_build(cfg: RunConfig, out: Path) -> int:
    result = cfg.build_state()
    state = result.state
    coeff_path = out / "state.csv"
    rows = 0
    with open(coeff_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "l", "k", "re", "im"])
        it = np.nditer(state.coeffs, flags=["multi_index"])
        for value in it:
            v = complex(value)
            if v != 0:
                n, l, k = it.multi_index
                writer.writerow([n, l, k, repr(v.real), repr(v.imag)])
                rows += 1
    norm_constants = {}
    for key, value in result.norms.items():
        if isinstance(value, np.ndarray):
            norm_constants[key] = [float(v) for v in value]
        else:
            norm_constants[key] = float(value)
    meta = {
        "family": result.meta.get("family", cfg.family),
        "label": _label_dict(result.label),
        "norm": float(inner_product(state, state).real),
        "raw_norm_sq": float(result.raw_norm_sq),
        "tail_bound": float(state.tail_bound),
        "cutoffs": {
            "n_max": state.cutoffs.n_max,
            "l_max": state.cutoffs.l_max,
            "k_max": state.cutoffs.k_max,
        },
        "backend": active_backend(),
        "norm_constants": norm_constants,
        "rows": rows,
    }
    _write_json(out / "state_meta.json", meta)
    print(f"wrote {coeff_path} ({rows} rows) and state_meta.json")
    return 0


def _check_norm(cfg: RunConfig) -> dict:
    result = cfg.build_state()
    observed = abs(inner_product(result.state, result.state).real - 1.0)
    return {
        "observed": observed,
        "details": {
            "tail_bound": float(result.state.tail_bound),
            "raw_norm_sq": float(result.raw_norm_sq),
        },
    }


def _check_identity(cfg: RunConfig, out: Path) -> dict:
    cutoffs = cfg.cutoffs
    if cutoffs is None:
        cutoffs = cfg.build_state().state.cutoffs
    report = resolve_identity(
        cfg.label(),
        cutoffs,
        cfg.quad,
        bundle=cfg.bundle(),
        params=cfg.params,
        alpha_k=cfg.family_spec.get("alpha_k"),
    )
    if cfg.dump_matrix:
        report.save_csv(out / "identity_matrix.csv")
    details = {
        "max_offdiag": report.max_offdiag,
        "max_diag_dev": report.max_diag_dev,
        "subspace_dim": len(report.subspace),
    }
    if "k_moment_errors" in report.metadata:
        details["max_k_moment_error"] = max(report.metadata["k_moment_errors"])
    return {"observed": report.deviation, "details": details}


def _check_stability(cfg: RunConfig) -> dict:
    fidelities = {}
    worst = 0.0
    for t in cfg.stability_times:
        f = check_temporal_stability(
            cfg.label(), t,
            bundle=cfg.bundle(), params=cfg.params,
            alpha_k=cfg.family_spec.get("alpha_k"),
            cutoffs=cfg.cutoffs, tail_tol=cfg.tail_tol,
        )
        fidelities[repr(t)] = f
        worst = max(worst, 1.0 - f)
    return {"observed": worst, "details": {"fidelity_defect_by_time": fidelities}}


def _check_action(cfg: RunConfig) -> dict:
    label = cfg.label()
    if not isinstance(label, BiCoherentLabel):
        return {"status": "not_applicable", "message": ACTION_NOT_APPLICABLE}
    result = cfg.build_state()
    h = HamiltonianSpec(HamiltonianKind.OSC_DIFFERENCE, params=cfg.params)
    energy = expectation_energy(result.state, h)
    target = cfg.params.omega_c * (label.J - label.Jp)
    return {
        "observed": abs(energy - target),
        "details": {"energy": energy, "target": target},
    }


def _check_moments(cfg: RunConfig) -> dict:
    bundle = cfg.bundle()
    if bundle is None:
        return {"status": "error", "message": "moment check needs an alpha sequence"}
    measure = ladder_measure(bundle, cfg.quad.k_nodes)
    k_top = min(2 * cfg.quad.k_nodes - 1, len(bundle.eps) - 1)
    errors = moment_check(measure, bundle.eps, bundle.scales.xi, k_top)
    return {
        "observed": float(errors.max()),
        "details": {"k_max": k_top, "errors": errors.tolist()},
    }


def cmd_verify(cfg: RunConfig, out: Path, which: list[str]) -> int:
    checks = []
    all_pass = True
    for name in which:
        tolerance = cfg.tolerances[name]
        entry = {"name": name, "tolerance": tolerance}
        try:
            if name == "norm":
                outcome = _check_norm(cfg)
            elif name == "identity":
                outcome = _check_identity(cfg, out)
            elif name == "stability":
                outcome = _check_stability(cfg)
            elif name == "action":
                outcome = _check_action(cfg)
            elif name == "moments":
                outcome = _check_moments(cfg)
            else:  # pragma: no cover - guarded by config parsing
                raise ConfigError(f"unknown check {name!r}")
        except LandauCSError as exc:
            entry.update(status="error", observed=None, message=str(exc), details={})
            all_pass = False
            checks.append(entry)
            continue
        status = outcome.get("status")
        if status is None:
            observed = outcome["observed"]
            status = "pass" if observed <= tolerance else "fail"
            entry.update(status=status, observed=observed,
                         details=outcome.get("details", {}))
            if status == "fail":
                all_pass = False
        else:
            entry.update(status=status, observed=outcome.get("observed"),
                         message=outcome.get("message", ""),
                         details=outcome.get("details", {}))
            if status == "error":
                all_pass = False
        checks.append(entry)

    report = {
        "family": cfg.family,
        "label": _label_dict(cfg.label()),
        "backend": active_backend(),
        "threads": cfg.threads,
        "seed": cfg.seed,
        "tolerances": {k: cfg.tolerances[k] for k in which},
        "checks": checks,
        "passed": all_pass,
    }
    _write_json(out / "verify_report.json", report)
    for entry in checks:
        obs = entry.get("observed")
        obs_text = "" if obs is None else f" observed={obs:.3e}"
        print(f"{entry['name']}: {entry['status']}{obs_text}")
    print(f"report: {out / 'verify_report.json'}")
    return 0 if all_pass else 1


SCAN_COLUMNS = ["parameter", "value", "norm_dev", "energy", "fidelity",
                "identity_dev", "status", "message"]


def cmd_scan(cfg: RunConfig, out: Path) -> int:
    if cfg.scan is None:
        raise ConfigError("scan: section missing from config")
    parameter = cfg.scan["parameter"]
    values = cfg.scan["values"]
    observables = cfg.scan.get("observables", ["norm", "energy", "fidelity"])
    t_fid = float(cfg.scan.get("fidelity_time", 1.0))

    rows = []
    for value in values:
        row = {c: "" for c in SCAN_COLUMNS}
        row["parameter"] = parameter
        row["value"] = repr(float(value))
        try:
            overrides = {parameter: value}
            result = cfg.build_state(overrides)
            label = result.label
            if "norm" in observables:
                row["norm_dev"] = repr(abs(inner_product(result.state, result.state).real - 1.0))
            if "energy" in observables:
                h = hamiltonian_for(label, bundle=cfg.bundle(), params=cfg.params,
                                    alpha_k=cfg.family_spec.get("alpha_k"))
                row["energy"] = repr(expectation_energy(result.state, h))
            if "fidelity" in observables:
                row["fidelity"] = repr(check_temporal_stability(
                    label, t_fid, bundle=cfg.bundle(), params=cfg.params,
                    alpha_k=cfg.family_spec.get("alpha_k"),
                    cutoffs=cfg.cutoffs, tail_tol=cfg.tail_tol))
            if "identity" in observables:
                cutoffs = cfg.cutoffs or result.state.cutoffs
                rep = resolve_identity(label, cutoffs, cfg.quad,
                                       bundle=cfg.bundle(), params=cfg.params,
                                       alpha_k=cfg.family_spec.get("alpha_k"))
                row["identity_dev"] = repr(rep.deviation)
            row["status"] = "ok"
        except ConvergenceDomainError as exc:
            row["status"] = "out_of_domain"
            row["message"] = str(exc)
        except LandauCSError as exc:
            row["status"] = "error"
            row["message"] = str(exc)
        rows.append(row)

    scan_path = out / "scan.csv"
    with open(scan_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SCAN_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {scan_path} ({len(rows)} rows)")
    return 0


# ---------------------------------------------------------------------------
# entry point


def _apply_tol_overrides(cfg: RunConfig, overrides: list[str]) -> None:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--tol expects NAME=VALUE, got {item!r}")
        name, _, value = item.partition("=")
        if name not in DEFAULT_TOLERANCES:
            raise ConfigError(f"--tol: unknown tolerance {name!r}")
        cfg.tolerances[name] = _as_float(value, f"--tol {name}")


def _apply_threads(threads: int) -> None:
    if threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {threads}")
    if NUMBA_ACTIVE and threads > 1:
        try:
            import numba

            numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
        except (ImportError, ValueError):  # pragma: no cover - best effort
            pass


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landaucs",
        description="Build coherent-state families over Landau levels and "
                    "verify their defining properties numerically.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                       help="override a tolerance from the config")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for the numba backend")

    p_build = sub.add_parser("build", help="build a state and dump coefficients")
    common(p_build)
    p_verify = sub.add_parser("verify", help="run verification checks")
    common(p_verify)
    p_verify.add_argument("--which", nargs="+", choices=ALL_CHECKS, default=None,
                          help="checks to run (default: the config's list)")
    p_scan = sub.add_parser("scan", help="sweep a label parameter over a grid")
    common(p_scan)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        _apply_tol_overrides(cfg, args.tol)
        _apply_threads(args.threads)
        cfg.threads = args.threads
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "build":
            return cmd_build(cfg, out)
        if args.command == "verify":
            which = args.which if args.which is not None else cfg.checks
            return cmd_verify(cfg, out, which)
        if args.command == "scan":
            return cmd_scan(cfg, out)
        parser.error(f"unknown command {args.command!r}")  # pragma: no cover
    except ValidationError as exc:
        print("invalid parameter bundle:", file=sys.stderr)
        for violation in exc.violations:
            print(f"  {violation}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 2  # pragma: no cover


def entrypoint() -> None:  # pragma: no cover - console script shim
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    entrypoint()
