"""Per-case verification pipeline, grid sweeps, and CSV/JSON reports."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

from . import __version__
from .errors import AdmissibilityError, NotConvergedWarning
from .extremiser import ExtremiserSpec, build
from .forms import builtin_functions, form_values, identity_check, quotient
from .minimiser import MinimiseOptions, build_basis, minimise_quotient
from .problem import ProblemParams, derive
from .quadrature import QuadratureSpec

CSV_FIELDS = ("mu", "eps", "s", "sharp_const", "extremal_quotient", "identity_gap_max",
              "minimiser_value", "min_minus_sharp", "status")
STATUS_OK = "ok"
STATUS_WARNING = "warning(membership)"
STATUS_FAILED = "failed(tolerance)"

QUOTIENT_RTOL = 1e-6
IDENTITY_RTOL = 1e-8
LOWER_BOUND_TOL = 1e-6
ALPHAS = (-1.0, 0.5, 1.0, 2.0)


@dataclass
class Record:
    mu: float
    eps: float
    s: float | None = None
    sharp_const: float | None = None
    extremal_quotient: float | None = None
    identity_gap_max: float | None = None
    minimiser_value: float | None = None
    min_minus_sharp: float | None = None
    status: str = STATUS_OK
    null_reasons: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def fail(self, note: str) -> None:
        self.status = STATUS_FAILED
        self.notes.append(note)

    def warn(self, note: str) -> None:
        if self.status == STATUS_OK:
            self.status = STATUS_WARNING
        self.notes.append(note)

    def csv_row(self) -> list[str]:
        out = []
        for name in CSV_FIELDS:
            v = getattr(self, name)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append("%.17g" % v)
            else:
                out.append(str(v))
        return out

    def as_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None
                d["null_reasons"].setdefault(k, "non-finite value")
        return d


def identity_gap_max(params: ProblemParams, spec: QuadratureSpec, alphas=ALPHAS, funcs=None) -> float:
    """Largest gap between the residual integral and g(alpha), relative to the
    magnitude of the terms of g (see :class:`IdentityCheck`).

    Taken over the built-in test functions, the given alphas and both roots b.
    """
    d = derive(params)
    worst = 0.0
    for f in funcs if funcs is not None else builtin_functions(params.mu):
        v = form_values(f, params, spec)
        for b in {d.b_minus, d.b_plus}:
            for al in alphas:
                worst = max(worst, identity_check(f, params, al, b, spec, values=v).scaled_gap)
    return worst


def run_case(params: ProblemParams, K: int = 16, scale: float = 1.0,
             opts: MinimiseOptions = MinimiseOptions(), spec: QuadratureSpec = QuadratureSpec(),
             min_gap_tol: float | None = None) -> Record:
    """Everything the sweep reports for one (mu, eps); never raises on numerical trouble."""
    rec = Record(params.mu, params.eps)
    try:
        d = derive(params)
    except AdmissibilityError as exc:
        rec.null_reasons.update({k: "inadmissible parameters" for k in CSV_FIELDS[2:-1]})
        rec.fail(str(exc))
        return rec
    rec.s, rec.sharp_const = d.s, d.sharp_const
    mu = params.mu

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if mu == 0:
            rec.null_reasons["extremal_quotient"] = "no extremiser family for mu = 0"
        elif d.s == 0.0:
            rec.null_reasons["extremal_quotient"] = "s = 0: the extremiser decays like x^(-mu/2) and B diverges"
            rec.warn("membership")
        else:
            try:
                f = build(ExtremiserSpec.for_params(params))
                rec.extremal_quotient = quotient(f, params, spec)
                if abs(rec.extremal_quotient - d.sharp_const) > QUOTIENT_RTOL * d.sharp_const:
                    rec.fail("extremal quotient differs from the sharp constant")
            except (ArithmeticError, ValueError) as exc:
                rec.null_reasons["extremal_quotient"] = f"{type(exc).__name__}: {exc}"
                rec.fail("extremiser evaluation failed")

        try:
            rec.identity_gap_max = identity_gap_max(params, spec)
            if rec.identity_gap_max > IDENTITY_RTOL:
                rec.fail("identity gap above tolerance")
        except (ArithmeticError, ValueError) as exc:
            rec.null_reasons["identity_gap_max"] = f"{type(exc).__name__}: {exc}"
            rec.fail("identity check failed")

    if mu == 0:
        rec.null_reasons["minimiser_value"] = rec.null_reasons["min_minus_sharp"] = "no trial family for mu = 0"
        return rec
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NotConvergedWarning)
            res = minimise_quotient(build_basis(params, K, scale, spec), opts)
        if any(issubclass(w.category, NotConvergedWarning) for w in caught):
            rec.notes.append("minimiser did not reach its gradient tolerance")
        rec.minimiser_value = res.value
        rec.min_minus_sharp = res.value - d.sharp_const
        if rec.min_minus_sharp < -LOWER_BOUND_TOL:
            rec.fail("minimiser value below the sharp constant")
        if min_gap_tol is not None and rec.min_minus_sharp > min_gap_tol:
            rec.fail("minimiser value not within min_gap_tol of the sharp constant")
    except (ArithmeticError, ValueError) as exc:
        reason = f"{type(exc).__name__}: {exc}"
        rec.null_reasons["minimiser_value"] = rec.null_reasons["min_minus_sharp"] = reason
        rec.fail("minimiser failed")
    return rec


# ---------------------------------------------------------------------------
# sweeps

EPS_ABSOLUTE = "absolute"
EPS_FRACTION = "fraction"


class ConfigError(ValueError):
    """Invalid sweep configuration."""


@dataclass(frozen=True)
class SweepConfig:
    mu_grid: tuple
    eps_values: tuple
    eps_mode: str = EPS_FRACTION
    quad: QuadratureSpec = QuadratureSpec()
    K: int = 16
    scale: float = 1.0
    restarts: int = 8
    seed: int = 42
    min_gap_tol: float | None = None
    output: str | None = None
    fmt: str = "csv"
    parallelism: int = 1

    def validate(self) -> "SweepConfig":
        if not self.mu_grid:
            raise ConfigError("mu grid is empty")
        if not self.eps_values:
            raise ConfigError("eps grid is empty")
        if self.eps_mode not in (EPS_ABSOLUTE, EPS_FRACTION):
            raise ConfigError(f"unknown eps mode {self.eps_mode!r}")
        if self.eps_mode == EPS_FRACTION and any(v > 1 for v in self.eps_values):
            raise ConfigError("eps fractions must be <= 1")
        if self.eps_mode == EPS_ABSOLUTE:
            for mu in self.mu_grid:
                for eps in self.eps_values:
                    ProblemParams(mu, eps).check()
        if self.fmt not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.fmt!r}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        return self

    def cases(self) -> list[ProblemParams]:
        out = []
        for mu in self.mu_grid:
            for v in self.eps_values:
                eps = v * 0.25 * mu * mu if self.eps_mode == EPS_FRACTION else v
                out.append(ProblemParams(float(mu), float(eps)))
        return out

    def canonical(self) -> dict:
        """Everything that can change the results (not output path or parallelism)."""
        d = asdict(self)
        d.pop("output")
        d.pop("fmt")
        d.pop("parallelism")
        return d

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _run_one(args) -> Record:
    params, cfg = args
    opts = MinimiseOptions(restarts=cfg.restarts, seed=cfg.seed)
    return run_case(params, cfg.K, cfg.scale, opts, cfg.quad, cfg.min_gap_tol)


def run_sweep(cfg: SweepConfig) -> list[Record]:
    """One record per grid point, in grid order, independent of parallelism."""
    cfg.validate()
    jobs = [(p, cfg) for p in cfg.cases()]
    if cfg.parallelism == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=cfg.parallelism) as ex:
        return list(ex.map(_run_one, jobs))


def csv_text(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def json_report(records, config_hash: str | None = None, started: datetime | None = None) -> dict:
    now = datetime.now(timezone.utc)
    meta = {
        "tool_version": __version__,
        "config_hash": config_hash,
        "timestamps": {"started": (started or now).isoformat(), "finished": now.isoformat()},
    }
    return {"metadata": meta, "records": [r.as_dict() for r in records]}


def write_report(records, path: str, fmt: str, config_hash: str | None = None,
                 started: datetime | None = None) -> None:
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text(records))
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(json_report(records, config_hash, started), fh, indent=2)
            fh.write("\n")


def exit_code(records) -> int:
    return 1 if any(r.status == STATUS_FAILED for r in records) else 0

