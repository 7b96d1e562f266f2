"""End-to-end orchestration: kernels -> SCF -> three sampling stages.

The walker population flows through the schedule in order; the energy
offset of the first diffusion stage starts from the preceding stage's
average (or the current population's mean local energy). Per-block trace
rows, rolling checkpoints, a final summary and a run manifest land in the
config's output directory. With a fixed seed a run is bit-reproducible,
including through kill/resume at any checkpoint.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import iofiles
from .config import RunConfig, config_hash, physics_hash, render_config
from .dqmc import PopulationControl, StageResult, run_stage
from .guiding import GuidingFunction, Hamiltonian
from .hf import OrbitalSet, basis_for_config, load_orbitals, save_orbitals, scf
from .jastrow import JastrowParams
from .kernels import GridSpec, KernelTable, build_kernel_table
from .sampler import WalkerPopulation, init_walkers
from .units import EnergyValue, hartree_to_kev

logger = logging.getLogger(__name__)

CACHE_DIR_ENV = "MAGQMC_CACHE_DIR"


def kernel_cache_dir(cfg: RunConfig) -> Path:
    env = os.environ.get(CACHE_DIR_ENV)
    return Path(env) if env else Path(cfg.outdir) / "cache"


def kernel_grid_for(cfg: RunConfig) -> GridSpec:
    return GridSpec(span=2.04 * cfg.hf_domain)


def ensure_kernels(cfg: RunConfig, force: bool = False) -> tuple[KernelTable, Path, bool]:
    """Build or reuse the cached kernel table; returns (table, path, cache_hit)."""
    grid = kernel_grid_for(cfg)
    gamma = cfg.field.gamma
    ms = sorted(set(o.m for o in cfg.occupations))
    probe = KernelTable(cfg.field.beta, gamma, float(cfg.z), ms,
                        grid.points(gamma), {}, {}, {})
    cache = kernel_cache_dir(cfg)
    cache.mkdir(parents=True, exist_ok=True)
    path = cache / f"kernels_{probe.cache_key()}.npz"
    if path.exists() and not force:
        try:
            table = KernelTable.load(path)
            logger.info("kernel cache hit: %s", path)
            return table, path, True
        except Exception as exc:
            logger.warning("kernel cache %s unusable (%s); rebuilding", path, exc)
    table = build_kernel_table(cfg.field.beta, gamma, float(cfg.z), ms, grid)
    table.save(path)
    return table, path, False


def orbital_path(cfg: RunConfig) -> Path:
    return Path(cfg.outdir) / f"orbitals_{physics_hash(cfg)}.npz"


def ensure_orbitals(
    cfg: RunConfig, kernels: KernelTable, force: bool = False
) -> tuple[OrbitalSet, Path, bool]:
    path = orbital_path(cfg)
    if path.exists() and not force:
        try:
            orbs = load_orbitals(path, expect_physics_hash=physics_hash(cfg))
            logger.info("orbital cache hit: %s", path)
            return orbs, path, True
        except Exception as exc:
            logger.warning("orbital file %s unusable (%s); re-running SCF", path, exc)
    path.parent.mkdir(parents=True, exist_ok=True)
    orbs = scf(cfg, kernels, basis_for_config(cfg))
    save_orbitals(path, orbs, physics_hash=physics_hash(cfg), config_hash=config_hash(cfg))
    return orbs, path, False


def guiding_for(cfg: RunConfig, orbitals: OrbitalSet) -> GuidingFunction:
    ham = Hamiltonian(
        gamma=cfg.field.gamma,
        nuclear_charge=float(cfg.z),
        spin_zeeman_included=cfg.spin_zeeman_included,
    )
    jas = JastrowParams(
        beta=cfg.field.beta, z_charge=float(cfg.z), n_electrons=cfg.n_electrons
    )
    return GuidingFunction(orbitals, ham, jas)


@dataclass
class PipelineResult:
    config: RunConfig
    hf_energy: EnergyValue
    stages: list[StageResult]
    trace_path: Path
    summary_path: Path
    manifest_path: Path

    @property
    def final(self) -> StageResult:
        return self.stages[-1]

    def stage(self, name: str) -> StageResult:
        for s in self.stages:
            if s.stage == name:
                return s
        raise KeyError(name)


def run_pipeline(
    cfg: RunConfig,
    resume: str | os.PathLike | None = None,
    stages: list[str] | None = None,
) -> PipelineResult:
    """Execute the configured schedule, optionally a subset or a resume."""
    t_start = time.perf_counter()
    cfg_hash = config_hash(cfg)
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    trace_path = outdir / "trace.csv"
    summary_path = outdir / "summary.txt"
    manifest_path = outdir / "manifest.json"
    ckpt_path = outdir / "checkpoint.npz"

    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    kernels, kernel_path, _ = ensure_kernels(cfg)
    timings["kernels"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    orbitals, orb_path, _ = ensure_orbitals(cfg, kernels)
    timings["hf"] = time.perf_counter() - t0
    hf_energy = EnergyValue(orbitals.e_total)
    logger.info("adiabatic reference energy: %s", hf_energy)

    guiding = guiding_for(cfg, orbitals)
    schedule = [s for s in cfg.schedule if stages is None or s.stage in stages]
    if not schedule:
        raise ValueError(f"no stages to run (requested {stages})")

    # --- state: fresh or resumed -------------------------------------------
    rng = np.random.default_rng(cfg.seed)
    stage_rows: dict[str, list[dict]] = {}
    start_stage, start_block = 0, 0
    control_state = None
    trace_text = iofiles.trace_header(cfg_hash)
    if resume is not None:
        ck = iofiles.load_checkpoint(resume, expect_config_hash=cfg_hash)
        rng.bit_generator.state = ck["rng_state"]
        wk = ck["walkers"]
        pop = WalkerPopulation(
            r=wk["r"], weight=wk["weight"], phase=wk["phase"],
            age=wk["age"].astype(int), ev=guiding.evaluate(wk["r"]),
        )
        ck_stage = ck.get("stage_name")
        names = [s.stage for s in schedule]
        if ck_stage in names and ck["stage_index"] < len(schedule) and \
                schedule[ck["stage_index"]].stage == ck_stage:
            # same (possibly filtered the same way) schedule: continue in place
            stage_rows = ck["stage_rows"]
            start_stage, start_block = ck["stage_index"], ck["next_block"]
            control_state = ck["control"]
            trace_text = ck["trace_text"]
            logger.info(
                "resumed at stage %d (%s) block %d from %s",
                start_stage, ck_stage, start_block, resume,
            )
        else:
            # different stage selection: carry the walkers over, start fresh
            logger.info(
                "checkpoint stage %r not at the same position in the requested "
                "schedule %s; carrying the population over and starting at %s",
                ck_stage, names, names[0],
            )
    else:
        t0 = time.perf_counter()
        pop = init_walkers(guiding, cfg.n_walkers, rng)
        timings["init"] = time.perf_counter() - t0

    trace_fh = open(trace_path, "w")
    trace_fh.write(trace_text)
    trace_fh.flush()

    def writer(stage_idx):
        def on_block(pop_now, row, control_now):
            nonlocal trace_text
            line = iofiles.trace_row(row)
            trace_text += line
            trace_fh.write(line)
            trace_fh.flush()
            rows = stage_rows.setdefault(row.stage, [])
            rows.append(iofiles.stats_to_jsonable([row])[0])
            due = cfg.checkpoint_every and (row.index + 1) % cfg.checkpoint_every == 0
            if due or row.index + 1 == schedule[stage_idx].n_blocks:
                cstate = None
                if control_now is not None:
                    cstate = {
                        "e_trial": control_now.e_trial,
                        "target": control_now.target,
                        "tau_block": control_now.tau_block,
                        "gain": control_now.gain,
                        "history": control_now.history,
                    }
                iofiles.save_checkpoint(
                    ckpt_path, cfg_hash, pop_now, rng,
                    stage_index=stage_idx, next_block=row.index + 1,
                    stage_name=schedule[stage_idx].stage,
                    stage_rows=stage_rows, control_state=cstate,
                    trace_text=trace_text,
                )
        return on_block

    results: list[StageResult] = []
    try:
        for idx, spec in enumerate(schedule):
            if idx < start_stage:
                prior = iofiles.stats_from_jsonable(stage_rows.get(spec.stage, []))
                pop_unused, res = None, _result_from_rows(spec, prior)
                results.append(res)
                continue
            blk0 = start_block if idx == start_stage else 0
            prior = iofiles.stats_from_jsonable(stage_rows.get(spec.stage, [])[:blk0])
            stage_rows[spec.stage] = stage_rows.get(spec.stage, [])[:blk0]

            control = None
            released = False
            if spec.stage in ("fpdqmc", "rpdqmc"):
                released = spec.stage == "rpdqmc"
                if control_state is not None and idx == start_stage:
                    control = PopulationControl(
                        e_trial=control_state["e_trial"],
                        target=control_state["target"],
                        tau_block=control_state["tau_block"],
                        gain=control_state["gain"],
                        history=list(control_state["history"]),
                    )
                else:
                    e0 = _initial_offset(results, pop)
                    control = PopulationControl(
                        e_trial=e0,
                        target=cfg.n_walkers,
                        tau_block=spec.steps_per_block * cfg.dtau,
                    )
            t0 = time.perf_counter()
            pop, res = run_stage(
                pop, guiding, spec, cfg.dtau, rng,
                control=control,
                released=released,
                dtau_metropolis=cfg.vqmc_step if spec.stage == "vqmc" else None,
                on_block=writer(idx),
                start_block=blk0,
                prior_stats=prior,
            )
            timings[spec.stage] = time.perf_counter() - t0
            control_state = None
            results.append(res)
            logger.info(
                "%s: <E_B> = %.6f hartree (%.5f keV), sigma = %.4g, population %d",
                spec.stage, res.energy, hartree_to_kev(res.energy), res.sigma, pop.size,
            )
    finally:
        trace_fh.close()

    summary = _summary_fields(cfg, hf_energy, results)
    iofiles.write_summary(summary_path, cfg_hash, summary)
    manifest = {
        "config_hash": cfg_hash,
        "physics_hash": physics_hash(cfg),
        "format": "magqmc-manifest/1",
        "config": render_config(cfg),
        "artifacts": {
            "kernels": str(kernel_path),
            "orbitals": str(orb_path),
            "trace": str(trace_path),
            "summary": str(summary_path),
            "checkpoint": str(ckpt_path),
        },
        "timings_sec": {k: round(v, 3) for k, v in timings.items()},
        "total_sec": round(time.perf_counter() - t_start, 3),
    }
    iofiles.write_manifest(manifest_path, manifest)
    return PipelineResult(
        config=cfg,
        hf_energy=hf_energy,
        stages=results,
        trace_path=trace_path,
        summary_path=summary_path,
        manifest_path=manifest_path,
    )


def _initial_offset(results: list[StageResult], pop: WalkerPopulation) -> float:
    for res in reversed(results):
        if np.isfinite(res.energy):
            return res.energy
    w = pop.weight
    return float(np.sum(w * np.real(pop.ev.e_loc)) / np.sum(w))


def _result_from_rows(spec, rows) -> StageResult:
    kept = [r.e_block for r in rows if not r.equilibration and not r.excluded]
    import math as _math

    avg = float(np.mean(kept)) if kept else float("nan")
    sig = float(np.std(kept, ddof=1)) if len(kept) >= 2 else float("nan")
    sem = sig / _math.sqrt(len(kept)) if len(kept) >= 2 else float("nan")
    lost = next((r.index for r in rows if r.excluded), None)
    return StageResult(spec.stage, list(rows), avg, sig, sem, spec, signal_lost_block=lost)


def _summary_fields(cfg: RunConfig, hf_energy: EnergyValue, results: list[StageResult]) -> dict:
    fields: dict = {
        "z": cfg.z,
        "n_electrons": cfg.n_electrons,
        "beta": cfg.field.beta,
        "b_tesla": cfg.field.b_tesla,
        "seed": cfg.seed,
        "n_walkers": cfg.n_walkers,
        "dtau": cfg.dtau,
        "spin_zeeman": str(cfg.spin_zeeman_included).lower(),
        "schedule": " ".join(
            f"{s.stage}:{s.n_blocks}x{s.steps_per_block}:{s.equilibration_blocks}"
            for s in cfg.schedule
        ),
        "hf_hartree": hf_energy.hartree,
        "hf_kev": hf_energy.kev,
    }
    for res in results:
        fields[f"{res.stage}_hartree"] = res.energy
        fields[f"{res.stage}_kev"] = hartree_to_kev(res.energy)
        fields[f"{res.stage}_sigma_hartree"] = res.sigma
        fields[f"{res.stage}_sigma_kev"] = hartree_to_kev(res.sigma)
        fields[f"{res.stage}_sem_hartree"] = res.sem
        fields[f"{res.stage}_blocks_kept"] = res.n_kept
        if res.signal_lost_block is not None:
            fields[f"{res.stage}_signal_lost_block"] = res.signal_lost_block
    if results:
        last = results[-1]
        fields["final_hartree"] = last.energy
        fields["final_kev"] = hartree_to_kev(last.energy)
        fields["final_sigma_kev"] = hartree_to_kev(last.sigma)
    return fields
