"""File formats: panel CSV ingestion and export, streaming trace files with a
trailing checksum, parameter JSON, run configuration, and summary artifacts.

Numbers are written with repr, the shortest digit string that round-trips the
double exactly, so rewriting a file from ingested data reproduces it byte for
byte and reruns with the same seed diff clean.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, replace

import numpy as np
import yaml

from .dataset import CovariateDesign, PanelDataset
from .errors import ConfigError, DataError, ModelError, TraceError
from .params import (
    BasicMeasurement,
    CovariateMeasurement,
    CutpointMeasurement,
    ModelParams,
    ModelStructure,
)
from .priors import PriorSpec
from .sampler import SamplerConfig
from .trace import ChainTrace, MOVE_NAMES, MoveCounters, TraceMeta

TRACE_MAGIC = "#lmrj-trace v1"
OUTPUT_ENV = "LMRJ_OUT"


def _fmt(x: float) -> str:
    return repr(float(x))


# -- panel CSV -------------------------------------------------------------------


def export_responses(data: PanelDataset, path) -> None:
    """Long format, canonical row order: subject-major, then occasion, then
    variable. Occasions are written 1-based."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "occasion", "var", "value"])
        for i in range(data.n):
            for t in range(data.T):
                for j, name in enumerate(data.var_names):
                    w.writerow([data.subjects[i], t + 1, name,
                                int(data.responses[i, t, j])])


def export_covariates(data: PanelDataset, path) -> None:
    if data.covariates is None:
        raise DataError("dataset has no covariates to export")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "occasion", *data.covariate_names])
        for i in range(data.n):
            for t in range(data.T):
                row = [data.subjects[i], t + 1]
                row += [_fmt(v) for v in data.covariates[i, t]]
                w.writerow(row)


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)
    return header, rows


def ingest(responses_path, covariates_path=None, *,
           levels: tuple[int, ...] | None = None,
           design: CovariateDesign | None = None,
           standardize: tuple[str, ...] = ()) -> PanelDataset:
    """Read a long-format response file (and optional wide covariate file)
    into a dense, balanced panel. Raises DataError with the offending row
    number on duplicates, gaps, or out-of-range categories."""
    header, rows = _read_rows(responses_path)
    if [h.strip() for h in header] != ["subject", "occasion", "var", "value"]:
        raise DataError(f"{responses_path}: expected header subject,occasion,var,value, "
                        f"got {','.join(header)}")
    subjects: dict[str, int] = {}
    var_names: dict[str, int] = {}
    parsed = []
    max_occ = 0
    for r, row in enumerate(rows, start=2):
        if len(row) != 4:
            raise DataError(f"{responses_path}:{r}: expected 4 fields, got {len(row)}")
        subj, occ_s, var, val_s = row
        try:
            occ = int(occ_s)
            val = int(val_s)
        except ValueError:
            raise DataError(f"{responses_path}:{r}: occasion and value must be integers") from None
        if occ < 1:
            raise DataError(f"{responses_path}:{r}: occasions are 1-based, got {occ}")
        if val < 0:
            raise DataError(f"{responses_path}:{r}: categories are 0-based, got {val}")
        subjects.setdefault(subj, len(subjects))
        var_names.setdefault(var, len(var_names))
        max_occ = max(max_occ, occ)
        parsed.append((r, subjects[subj], occ - 1, var_names[var], val))

    n, T, r_vars = len(subjects), max_occ, len(var_names)
    if n == 0:
        raise DataError(f"{responses_path}: no data rows")
    resp = np.full((n, T, r_vars), -1, dtype=int)
    where = np.zeros((n, T, r_vars), dtype=int)
    for r, i, t, j, val in parsed:
        if resp[i, t, j] != -1:
            raise DataError(f"{responses_path}:{r}: duplicate cell "
                            f"(subject {list(subjects)[i]}, occasion {t + 1}, "
                            f"var {list(var_names)[j]}), first at row {where[i, t, j]}")
        resp[i, t, j] = val
        where[i, t, j] = r
    missing = np.argwhere(resp < 0)
    if missing.size:
        i, t, j = missing[0]
        raise DataError(f"{responses_path}: missing cell (subject {list(subjects)[i]}, "
                        f"occasion {t + 1}, var {list(var_names)[j]}); "
                        f"the panel must be balanced")
    if levels is None:
        levels = tuple(int(resp[:, :, j].max()) + 1 for j in range(r_vars))

    cov = None
    cov_names: tuple[str, ...] = ()
    if covariates_path is not None:
        cheader, crows = _read_rows(covariates_path)
        if len(cheader) < 3 or [h.strip() for h in cheader[:2]] != ["subject", "occasion"]:
            raise DataError(f"{covariates_path}: expected header subject,occasion,<columns>")
        cov_names = tuple(h.strip() for h in cheader[2:])
        cov = np.full((n, T, len(cov_names)), np.nan)
        for r, row in enumerate(crows, start=2):
            if len(row) != 2 + len(cov_names):
                raise DataError(f"{covariates_path}:{r}: expected {2 + len(cov_names)} "
                                f"fields, got {len(row)}")
            subj, occ_s = row[0], row[1]
            if subj not in subjects:
                raise DataError(f"{covariates_path}:{r}: unknown subject {subj}")
            try:
                occ = int(occ_s)
                vals = [float(v) for v in row[2:]]
            except ValueError:
                raise DataError(f"{covariates_path}:{r}: malformed numeric field") from None
            if not 1 <= occ <= T:
                raise DataError(f"{covariates_path}:{r}: occasion {occ} outside 1..{T}")
            i = subjects[subj]
            if not np.isnan(cov[i, occ - 1]).all():
                raise DataError(f"{covariates_path}:{r}: duplicate row for "
                                f"subject {subj}, occasion {occ}")
            cov[i, occ - 1] = vals
        bad = np.argwhere(np.isnan(cov).any(axis=2))
        if bad.size:
            i, t = bad[0]
            raise DataError(f"{covariates_path}: missing covariate row "
                            f"(subject {list(subjects)[i]}, occasion {t + 1})")

    data = PanelDataset(responses=resp, levels=levels,
                        var_names=tuple(var_names), covariates=cov,
                        covariate_names=cov_names, design=design,
                        subjects=tuple(subjects))
    if standardize:
        data = data.standardize(tuple(standardize))
    return data


# -- parameter files -----------------------------------------------------------


def save_params(params: ModelParams, structure: ModelStructure, path) -> None:
    m = params.measurement
    doc = {
        "structure": structure.to_meta(),
        "init_w": params.init_w.tolist(),
        "trans_w": params.trans_w.tolist(),
    }
    if isinstance(m, BasicMeasurement):
        doc["emit_w"] = m.emit_w.tolist()
    elif isinstance(m, CutpointMeasurement):
        doc["tendency"] = m.tendency.tolist()
        doc["cutpoints"] = m.cutpoints.tolist()
    else:
        doc["support"] = m.support.tolist()
        doc["slopes"] = m.slopes.tolist()
        doc["log_odds"] = m.log_odds.tolist()
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_params(path) -> tuple[ModelParams, ModelStructure]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"{path}: cannot read parameter file ({e})") from None
    try:
        structure = ModelStructure.from_meta(doc["structure"])
        init_w = np.asarray(doc["init_w"], dtype=float)
        trans_w = np.asarray(doc["trans_w"], dtype=float)
        if structure.variant == "basic":
            meas = BasicMeasurement(np.asarray(doc["emit_w"], dtype=float))
        elif structure.variant == "cutpoint":
            meas = CutpointMeasurement(np.asarray(doc["tendency"], dtype=float),
                                       np.asarray(doc["cutpoints"], dtype=float))
        else:
            meas = CovariateMeasurement(np.asarray(doc["support"], dtype=float),
                                        np.asarray(doc["slopes"], dtype=float),
                                        np.asarray(doc["log_odds"], dtype=float))
    except KeyError as e:
        raise DataError(f"{path}: parameter file missing field {e}") from None
    params = ModelParams(init_w, trans_w, meas)
    params.validate(structure)
    return params, structure


# -- trace files -----------------------------------------------------------------


class FileTraceSink:
    """Streams sweeps to disk; memory use is flat in the number of sweeps.

    Layout: a magic+JSON header line, one CSV record per sweep
    (sweep, k, loglik, logprior, move, accepted, mh bit string, theta...),
    a #counters JSON line, and a #checksum trailer covering every byte above it.
    """

    def __init__(self, path):
        self.path = path
        self._fh = None
        self._hash = hashlib.sha256()
        self._rows = 0

    def _emit(self, line: str) -> None:
        data = (line + "\n").encode()
        self._hash.update(data)
        self._fh.write(data)

    def start(self, meta: TraceMeta) -> None:
        self._fh = open(self.path, "wb")
        self._emit(TRACE_MAGIC + " " + json.dumps(meta.to_dict(), sort_keys=True))

    def record(self, sweep, k, loglik, logprior, move, accepted, mh_bits, theta) -> None:
        bits = "".join("1" if b else "0" for b in mh_bits)
        cells = [str(sweep), str(k), _fmt(loglik), _fmt(logprior),
                 MOVE_NAMES[move], "1" if accepted else "0", bits]
        cells += [_fmt(v) for v in theta]
        self._emit(",".join(cells))
        self._rows += 1

    def finish(self, counters: MoveCounters) -> None:
        self._emit("#counters " + json.dumps(counters.as_dict(), sort_keys=True))
        self._emit(f"#checksum sha256={self._hash.hexdigest()} lines={self._rows}")
        self._fh.close()
        self._fh = None

    def result(self):
        return self.path


def read_trace(path) -> ChainTrace:
    """Load a trace file, verifying the trailing checksum."""
    move_codes = {name: code for code, name in enumerate(MOVE_NAMES)}
    sweeps, ks, lls, lps, moves, accs, bits, thetas = [], [], [], [], [], [], [], []
    counters = None
    meta = None
    trailer = None
    running = hashlib.sha256()
    try:
        fh = open(path, "rb")
    except OSError as e:
        raise TraceError(f"{path}: cannot read trace file ({e})") from None
    with fh:
        for raw in fh:
            line = raw.decode().rstrip("\n")
            if meta is None:
                if not line.startswith(TRACE_MAGIC + " "):
                    raise TraceError(f"{path}: not a trace file (bad header)")
                meta = TraceMeta.from_dict(json.loads(line[len(TRACE_MAGIC) + 1:]))
                running.update(raw)
                continue
            if line.startswith("#checksum "):
                trailer = line
                break
            running.update(raw)
            if line.startswith("#counters "):
                counters = MoveCounters.from_dict(json.loads(line[len("#counters "):]))
                continue
            parts = line.split(",")
            try:
                sweeps.append(int(parts[0]))
                ks.append(int(parts[1]))
                lls.append(float(parts[2]))
                lps.append(float(parts[3]))
                moves.append(move_codes[parts[4]])
                accs.append(parts[5] == "1")
                bits.append([c == "1" for c in parts[6]])
                thetas.append(np.array([float(v) for v in parts[7:]]))
            except (ValueError, KeyError, IndexError) as e:
                raise TraceError(f"{path}: corrupt record at sweep line "
                                 f"{len(sweeps)} ({e})") from None
    if meta is None:
        raise TraceError(f"{path}: empty file")
    if trailer is None:
        raise TraceError(f"{path}: missing checksum trailer; trace is truncated")
    fields = dict(p.split("=", 1) for p in trailer[len("#checksum "):].split())
    if fields.get("sha256") != running.hexdigest():
        raise TraceError(f"{path}: checksum mismatch; file is corrupt")
    if int(fields.get("lines", -1)) != len(sweeps):
        raise TraceError(f"{path}: row count mismatch "
                         f"({len(sweeps)} read, {fields.get('lines')} declared)")
    if counters is None:
        raise TraceError(f"{path}: missing counters record")
    return ChainTrace(meta=meta,
                      sweep=np.asarray(sweeps), k=np.asarray(ks),
                      loglik=np.asarray(lls), logprior=np.asarray(lps),
                      move=np.asarray(moves), accepted=np.asarray(accs),
                      mh_accepts=np.asarray(bits, dtype=bool),
                      thetas=thetas, counters=counters)


# -- run configuration -------------------------------------------------------------


@dataclass
class RunConfig:
    structure: ModelStructure
    prior: PriorSpec
    sampler: SamplerConfig
    responses: str | None = None
    covariates: str | None = None
    design: CovariateDesign | None = None
    standardize: tuple[str, ...] = ()
    levels: tuple[int, ...] | None = None
    output: str = "."
    chains: int = 1
    seeds: tuple[int, ...] = ()
    ordering: str = "none"
    k_init: int = 1
    grid: tuple[tuple[str, "RunConfig"], ...] = ()
    name: str = "run"

    def chain_seeds(self) -> tuple[int, ...]:
        if self.seeds:
            return self.seeds
        return tuple(self.sampler.seed + c for c in range(self.chains))

    def load_data(self) -> PanelDataset | None:
        if self.responses is None:
            return None
        return ingest(self.responses, self.covariates, levels=self.levels,
                      design=self.design, standardize=self.standardize)


def _build_structure(model: dict, T: int | None = None) -> ModelStructure:
    variant = model.get("variant")
    if variant not in ("basic", "cutpoint", "covariate"):
        raise ConfigError(f"model.variant must be basic, cutpoint or covariate, "
                          f"got {variant!r}")
    levels = tuple(int(l) for l in model.get("levels", ()))
    if not levels:
        raise ConfigError("model.levels is required")
    T = int(model.get("T", T or 1))
    n_cov = 0
    if variant == "covariate":
        cols = tuple(model.get("covariates", ()))
        dummies = bool(model.get("occasion_dummies", True))
        n_cov = len(cols) + (T - 1 if dummies else 0)
        if n_cov < 1:
            raise ConfigError("covariate variant needs covariate columns or occasion dummies")
    return ModelStructure(variant, T=T, levels=levels,
                          time_varying=bool(model.get("time_varying", False)),
                          n_covariates=n_cov)


def load_config(path) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config ({e})") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: malformed YAML ({e})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return _config_from_dict(doc, path)


def _config_from_dict(doc: dict, path) -> RunConfig:
    known = {"model", "data", "prior", "sampler", "run", "grid"}
    stray = set(doc) - known
    if stray:
        raise ConfigError(f"{path}: unknown config sections {sorted(stray)}")
    model = doc.get("model", {})
    data = doc.get("data", {})
    run = doc.get("run", {})

    T = int(model["T"]) if "T" in model else None
    structure = _build_structure(model, T)

    prior_doc = dict(doc.get("prior", {}))
    try:
        prior = PriorSpec.from_dict(prior_doc)
    except (TypeError, ValueError, ModelError) as e:
        raise ConfigError(f"{path}: bad prior block ({e})") from None

    sampler_doc = dict(doc.get("sampler", {}))
    if "sweeps" not in sampler_doc:
        raise ConfigError(f"{path}: sampler.sweeps is required")
    try:
        cfg = SamplerConfig(**sampler_doc)
    except (TypeError, ModelError) as e:
        raise ConfigError(f"{path}: bad sampler block ({e})") from None

    responses = data.get("responses")
    covariates = data.get("covariates")
    for p in (responses, covariates):
        if p is not None and not os.path.exists(p):
            raise ConfigError(f"{path}: referenced file does not exist: {p}")
    if structure.variant == "covariate" and responses is not None:
        if model.get("covariates") and covariates is None:
            raise ConfigError(f"{path}: covariate variant lists columns but "
                              f"data.covariates is missing")
    design = None
    if structure.variant == "covariate":
        design = CovariateDesign(columns=tuple(model.get("covariates", ())),
                                 occasion_dummies=bool(model.get("occasion_dummies", True)))

    output = run.get("output") or os.environ.get(OUTPUT_ENV) or "."
    base = RunConfig(
        structure=structure, prior=prior, sampler=cfg,
        responses=responses, covariates=covariates, design=design,
        standardize=tuple(data.get("standardize", ())),
        levels=tuple(int(l) for l in model.get("levels", ())) or None,
        output=str(output),
        chains=int(run.get("chains", 1)),
        seeds=tuple(int(s) for s in run.get("seeds", ())),
        ordering=str(run.get("ordering", "none")),
        k_init=int(run.get("k_init", 1)),
        name=str(run.get("name", "run")),
    )
    if base.chains < 1:
        raise ConfigError(f"{path}: run.chains must be >= 1")
    if base.seeds and len(base.seeds) != base.chains:
        raise ConfigError(f"{path}: run.seeds must list one seed per chain")
    if base.k_init > prior.k_max:
        raise ConfigError(f"{path}: run.k_init {base.k_init} exceeds "
                          f"prior.k_max {prior.k_max}")

    cells = []
    for cell in doc.get("grid", []) or []:
        if not isinstance(cell, dict) or "name" not in cell:
            raise ConfigError(f"{path}: grid entries need a name")
        cell_prior = dict(prior_doc)
        cell_prior.update(cell.get("prior", {}))
        try:
            p = PriorSpec.from_dict(cell_prior)
        except (TypeError, ValueError, ModelError) as e:
            raise ConfigError(f"{path}: bad grid prior for {cell['name']!r} ({e})") from None
        cells.append((str(cell["name"]), replace(base, prior=p, grid=())))
    return replace(base, grid=tuple(cells))


# -- summary artifacts --------------------------------------------------------------


def _interval_doc(hpd: dict) -> dict:
    return {f"{int(round(level * 100))}": [lo, hi] for level, (lo, hi) in sorted(hpd.items())}


def write_summary_json(summary, path) -> None:
    doc = {
        "posterior_of_k": {str(k): v for k, v in sorted(summary.k_mass.items())},
        "k_star": summary.k_star,
        "mode_sweep_index": summary.mode_index,
        "burn_in": summary.burn_in,
        "n_draws_at_k_star": summary.n_draws,
        "ordering": summary.ordering,
        "per_state": [
            {"name": s.name, "mean": s.mean, "sd": s.sd,
             "hpd": _interval_doc(s.hpd), "stars": s.stars}
            for s in summary.per_state
        ],
        "all_draws": [
            {"name": s.name, "mean": s.mean, "sd": s.sd,
             "hpd": _interval_doc(s.hpd), "stars": s.stars}
            for s in summary.invariant
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _param_table(rows, title: str) -> str:
    lines = [title, "-" * len(title)]
    head = ("parameter", "mean", "sd", "90% HPD", "95% HPD", "99% HPD", "")
    body = [head]
    for s in rows:
        cells = (s.name, f"{s.mean:.4f}", f"{s.sd:.4f}")
        cells += tuple(f"[{lo:.4f}, {hi:.4f}]" for _, (lo, hi) in sorted(s.hpd.items()))
        cells += ("*" * s.stars,)
        body.append(cells)
    widths = [max(len(r[c]) for r in body) for c in range(7)]
    for r in body:
        lines.append("  ".join(r[c].ljust(widths[c]) for c in range(7)).rstrip())
    return "\n".join(lines)


def write_summary_text(summary, table_rows, path) -> None:
    """Aligned human-readable tables: acceptance, posterior of k, parameters."""
    from .postprocess import format_acceptance_table

    parts = []
    if table_rows is not None:
        parts.append("Acceptance rates")
        parts.append("----------------")
        parts.append(format_acceptance_table(table_rows))
        parts.append("")
    parts.append("Posterior distribution of the number of states")
    parts.append("----------------------------------------------")
    for k, v in sorted(summary.k_mass.items()):
        marker = "  <- selected" if k == summary.k_star else ""
        parts.append(f"  k = {k}: {v:.4f}{marker}")
    parts.append("")
    parts.append(_param_table(summary.per_state,
                              f"Parameter estimates conditional on k* = {summary.k_star} "
                              f"({summary.n_draws} draws, ordering: {summary.ordering})"))
    if summary.invariant:
        parts.append("")
        parts.append(_param_table(summary.invariant,
                                  "Shared parameters, ergodic means over all draws"))
    parts.append("")
    parts.append("stars: number of nested HPD levels (90/95/99) excluding zero")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def write_occupancy_csv(curves, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sweep", "k", "fraction"])
        for sweep, k, frac in curves.tidy():
            w.writerow([sweep, k, _fmt(frac)])
