"""Command-line front end: simulate | fit | summarize | check.

Exit codes: 0 success, 1 bad input (data, config, trace files), 2 internal
error (broken invariant or unexpected exception).
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback

import numpy as np

from .dataset import CovariateDesign
from .errors import ConfigError, DataError, LmrjError, TraceError
from .io import (
    FileTraceSink,
    OUTPUT_ENV,
    export_covariates,
    export_responses,
    ingest,
    load_config,
    load_params,
    read_trace,
    write_occupancy_csv,
    write_summary_json,
    write_summary_text,
)
from .postprocess import ORDERINGS, acceptance_table, occupancy_fractions, summarize
from .priors import PriorSpec, sample_prior
from .sampler import SamplerConfig, frequency_start, run_chain
from .simulate import simulate_panel
from .trace import ChainTrace


def _out_dir(value: str | None) -> str:
    out = value or os.environ.get(OUTPUT_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _read_covariate_table(path):
    """Wide covariate CSV without a response file: subject,occasion,<cols>."""
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 3 or header[:2] != ["subject", "occasion"]:
            raise DataError(f"{path}: expected header subject,occasion,<columns>")
        names = tuple(h.strip() for h in header[2:])
        subjects: dict[str, dict[int, list[float]]] = {}
        for r, row in enumerate(reader, start=2):
            if len(row) != 2 + len(names):
                raise DataError(f"{path}:{r}: expected {2 + len(names)} fields")
            try:
                occ = int(row[1])
                vals = [float(v) for v in row[2:]]
            except ValueError:
                raise DataError(f"{path}:{r}: malformed numeric field") from None
            cell = subjects.setdefault(row[0], {})
            if occ in cell:
                raise DataError(f"{path}:{r}: duplicate row for subject {row[0]}, "
                                f"occasion {occ}")
            cell[occ] = vals
    T = max(max(c) for c in subjects.values())
    arr = np.empty((len(subjects), T, len(names)))
    for i, (subj, cells) in enumerate(subjects.items()):
        if sorted(cells) != list(range(1, T + 1)):
            raise DataError(f"{path}: subject {subj} does not cover occasions 1..{T}")
        for t in range(T):
            arr[i, t] = cells[t + 1]
    return tuple(subjects), names, arr


def cmd_simulate(args) -> int:
    params, structure = load_params(args.params)
    out = _out_dir(args.out)
    kwargs = {}
    if structure.variant == "covariate":
        if not args.covariates:
            raise ConfigError("covariate variant needs --covariates with raw columns")
        _, names, arr = _read_covariate_table(args.covariates)
        design_cols = tuple(n for n in names)
        kwargs.update(covariates=arr, covariate_names=names,
                      design=CovariateDesign(design_cols, occasion_dummies=True))
    else:
        kwargs["T"] = args.T or structure.T
        if structure.variant == "basic" and len(structure.levels) > 1:
            kwargs["levels"] = structure.levels
    data = simulate_panel(params, n=args.n, seed=args.seed, **kwargs)
    rpath = os.path.join(out, "responses.csv")
    export_responses(data, rpath)
    written = [rpath]
    if data.covariates is not None:
        cpath = os.path.join(out, "covariates.csv")
        export_covariates(data, cpath)
        written.append(cpath)
    for p in written:
        print(p)
    return 0


def _check_ordering(ordering: str, structure) -> None:
    if ordering == "by-support-point" and structure.variant != "covariate":
        raise ConfigError("by-support-point ordering needs covariate support "
                          f"points; this model is the {structure.variant} variant")


def _initial_params(cfg, data, seed):
    if cfg.k_init <= 1:
        return frequency_start(data, cfg.structure)
    rng = np.random.default_rng(seed)
    return sample_prior(cfg.prior, cfg.k_init, cfg.structure, rng)


def _run_cell(name, cfg, data, out) -> list[str]:
    from dataclasses import replace

    _check_ordering(cfg.ordering, cfg.structure)
    written = []
    for c, seed in enumerate(cfg.chain_seeds()):
        scfg = replace(cfg.sampler, seed=seed)
        stem = f"{name}-chain{c}" if cfg.chains > 1 else name
        tpath = os.path.join(out, stem + ".trace")
        init = _initial_params(cfg, data, seed)
        run_chain(data, cfg.prior, scfg, init, structure=cfg.structure,
                  sink=FileTraceSink(tpath))
        written.append(tpath)
        trace = read_trace(tpath)
        summary = summarize(trace, burn_in=scfg.burn_in, ordering=cfg.ordering)
        rows = acceptance_table(trace.counters, len(trace), cfg.structure)
        jpath = os.path.join(out, stem + ".summary.json")
        xpath = os.path.join(out, stem + ".tables.txt")
        opath = os.path.join(out, stem + ".occupancy.csv")
        write_summary_json(summary, jpath)
        write_summary_text(summary, rows, xpath)
        write_occupancy_csv(occupancy_fractions(trace, thin=max(1, len(trace) // 2000)),
                            opath)
        written += [jpath, xpath, opath]
        print(f"{stem}: k* = {summary.k_star}, "
              f"mass = {summary.k_mass.get(summary.k_star, 0.0):.3f}, "
              f"{len(trace)} sweeps")
    return written


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, sampler=replace(cfg.sampler, seed=args.seed), seeds=())
    out = _out_dir(args.out or cfg.output)
    if cfg.responses is None:
        raise ConfigError("fit needs data.responses in the config")
    data = cfg.load_data()
    written = []
    if cfg.grid:
        for name, cell in cfg.grid:
            cell_out = os.path.join(out, name)
            os.makedirs(cell_out, exist_ok=True)
            written += _run_cell(cfg.name, cell, data, cell_out)
    else:
        written += _run_cell(cfg.name, cfg, data, out)
    for p in written:
        print(p)
    return 0


def _merge_traces(traces: list[ChainTrace], burn_in: int) -> ChainTrace:
    first = traces[0]
    for t in traces[1:]:
        if t.meta.structure != first.meta.structure:
            raise DataError("traces come from different model structures")
    if len(traces) == 1 and burn_in == 0:
        return first
    sweep, k, ll, lp, mv, ac, bits, thetas = [], [], [], [], [], [], [], []
    offset = 0
    for t in traces:
        if burn_in >= len(t):
            raise DataError(f"burn-in {burn_in} consumes the whole trace "
                            f"({len(t)} sweeps)")
        sl = slice(burn_in, len(t))
        sweep.append(np.arange(offset, offset + len(t) - burn_in))
        k.append(t.k[sl])
        ll.append(t.loglik[sl])
        lp.append(t.logprior[sl])
        mv.append(t.move[sl])
        ac.append(t.accepted[sl])
        bits.append(t.mh_accepts[sl])
        thetas.extend(t.thetas[burn_in:])
        offset += len(t) - burn_in
    return ChainTrace(meta=first.meta,
                      sweep=np.concatenate(sweep), k=np.concatenate(k),
                      loglik=np.concatenate(ll), logprior=np.concatenate(lp),
                      move=np.concatenate(mv), accepted=np.concatenate(ac),
                      mh_accepts=np.concatenate(bits), thetas=thetas,
                      counters=first.counters)


def cmd_summarize(args) -> int:
    traces = [read_trace(p) for p in args.trace]
    _check_ordering(args.ordering, traces[0].meta.structure)
    burn = args.burn_in if args.burn_in is not None \
        else traces[0].meta.sampler.get("burn_in", 0)
    pooled = _merge_traces(traces, burn)
    summary = summarize(pooled, burn_in=0, ordering=args.ordering)
    out = _out_dir(args.out)
    rows = acceptance_table(traces[0].counters, len(traces[0]),
                            traces[0].meta.structure) if len(traces) == 1 else None
    jpath = os.path.join(out, "summary.json")
    xpath = os.path.join(out, "tables.txt")
    write_summary_json(summary, jpath)
    write_summary_text(summary, rows, xpath)
    written = [jpath, xpath]
    for path, t in zip(args.trace, traces):
        stem = os.path.splitext(os.path.basename(path))[0]
        opath = os.path.join(out, f"occupancy-{stem}.csv")
        write_occupancy_csv(occupancy_fractions(t, thin=max(1, len(t) // 2000)), opath)
        written.append(opath)
    for p in written:
        print(p)
    return 0


def cmd_check(args) -> int:
    from .oracle import (TOLERANCES, loglik_report, prior_chain_check,
                         split_jacobian_report)
    from .params import ModelStructure
    from .sampler import (apply_combine, apply_split, draw_split_aux,
                          insert_state_block, remove_state_block)
    from .priors import draw_state_block
    from .oracle import OracleReport

    rng = np.random.default_rng(args.seed)
    reports = []
    cfg = SamplerConfig(sweeps=10)
    cases = [
        (ModelStructure("basic", T=4, levels=(3,)), {}),
        (ModelStructure("basic", T=3, levels=(2, 3)), {"levels": (2, 3)}),
        (ModelStructure("cutpoint", T=4, levels=(4,)), {}),
        (ModelStructure("covariate", T=3, levels=(2, 2), n_covariates=3),
         {"covariate": True}),
    ]
    for structure, extra in cases:
        for rep in range(args.cases):
            k = int(rng.integers(1, 5))
            params = sample_prior(PriorSpec(), k, structure, rng)
            sim_kwargs = {"T": structure.T}
            if extra.get("covariate"):
                x = rng.normal(size=(6, structure.T, 1))
                sim_kwargs = {"covariates": x, "covariate_names": ("x1",),
                              "design": CovariateDesign(("x1",), True)}
            elif "levels" in extra:
                sim_kwargs["levels"] = extra["levels"]
            data = simulate_panel(params, n=6, seed=int(rng.integers(1 << 30)),
                                  **sim_kwargs)
            reports.append(loglik_report(
                params, data, structure,
                case=f"loglik {structure.variant} k={k} #{rep}"))
            u0 = int(rng.integers(k))
            aux = draw_split_aux(params, u0, cfg, structure, rng)
            reports.append(split_jacobian_report(
                params, u0, aux, structure,
                case=f"split |J| {structure.variant} k={k} #{rep}"))
            # reconstruction round trips
            child = apply_split(params, u0, aux, k)
            back, _, _ = apply_combine(child, u0, k)
            err = float(np.abs(back.flatten() - params.flatten()).max())
            reports.append(OracleReport(
                f"split/combine roundtrip {structure.variant} k={k} #{rep}",
                err, 0.0, TOLERANCES["roundtrip"]))
            block, _ = draw_state_block(PriorSpec(), k + 1, structure, rng)
            grown = insert_state_block(params, block, 0)
            shrunk, _ = remove_state_block(grown, 0)
            err = float(np.abs(shrunk.flatten() - params.flatten()).max())
            reports.append(OracleReport(
                f"birth/death roundtrip {structure.variant} k={k} #{rep}",
                err, 0.0, TOLERANCES["roundtrip"]))

    if args.prior_sweeps > 0:
        chk = prior_chain_check(
            PriorSpec(k_max=3),
            SamplerConfig(sweeps=args.prior_sweeps,
                          burn_in=args.prior_sweeps // 10, seed=args.seed))
        reports += chk.reports

    failed = 0
    for r in reports:
        print(r.describe())
        failed += 0 if r.passed else 1
    print(f"{len(reports) - failed}/{len(reports)} checks passed")
    return 0 if failed == 0 else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lmrj",
                                 description="Bayesian latent Markov models with "
                                             "an unknown number of states")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw a synthetic panel from saved parameters")
    s.add_argument("--params", required=True, help="parameter JSON file")
    s.add_argument("--n", type=int, required=True, help="number of subjects")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--T", type=int, default=None, help="occasions (defaults to the "
                                                       "structure's T)")
    s.add_argument("--covariates", default=None,
                   help="wide covariate CSV to condition on (covariate variant)")
    s.add_argument("--out", default=None, help=f"output dir (default ${OUTPUT_ENV} or .)")
    s.set_defaults(fn=cmd_simulate)

    f = sub.add_parser("fit", help="run the sampler from a YAML config")
    f.add_argument("--config", required=True)
    f.add_argument("--seed", type=int, default=None, help="override the config seed")
    f.add_argument("--out", default=None)
    f.set_defaults(fn=cmd_fit)

    m = sub.add_parser("summarize", help="post-process one or more trace files")
    m.add_argument("--trace", nargs="+", required=True)
    m.add_argument("--burn-in", type=int, default=None)
    m.add_argument("--ordering", choices=ORDERINGS, default="none")
    m.add_argument("--out", default=None)
    m.set_defaults(fn=cmd_summarize)

    c = sub.add_parser("check", help="run the verification oracles")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--cases", type=int, default=3, help="random cases per variant")
    c.add_argument("--prior-sweeps", type=int, default=20_000,
                   help="sweeps for the prior-recovery check (0 disables)")
    c.set_defaults(fn=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (DataError, ConfigError, TraceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except LmrjError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
