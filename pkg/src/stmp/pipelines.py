"""Patch-based restoration tasks: denoising, super-resolution, compressive
and masked recovery.

Every task follows the same skeleton: slide a patch grid over the input,
split each measured patch into its flat (DC) component and the rest, sparse
code the rest against the (projected) dictionary, lift the code back to full
patch space, re-add the flat component, and average the overlapping restored
patches into the output.  The flat component is handled through the
operator: with c = op(all-ones patch), the measurement's DC coefficient is
<y, c> / |c|^2, which reduces to the patch mean when nothing is projected.

Patch coding is independent patch to patch, so it may fan out over worker
threads; chunk boundaries and merge order are fixed, making outputs and
counter totals identical for any thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
import time

import numpy as np

from .clustering import ClusterTree
from .dictionary import Dictionary, ScoreCounter
from .operators import (
    CODED_EXPOSURE,
    IDENTITY,
    ROW_SELECT,
    ObservationOperator,
    apply,
    apply_batch,
    block_average_operator,
    identity_operator,
    lift_code,
    project_dictionary,
)
from .pursuit import ExactSelector, SearchParams, TreeSelector, matching_pursuit, reconstruct
from .tensor import PatchLayout, extract_patches, aggregate_patches

EXACT = "exact"
STMP = "stmp"

_CHUNK = 64

CSV_HEADER = "task, m, n, K, alpha, selector, psnr_db, snr_db, inner_products, patches, seconds"


@dataclass
class TaskConfig:
    """Shared restoration parameters; ranks follow the input tensor."""

    patch_shape: tuple[int, ...]
    stride: tuple[int, ...]
    K: int
    alpha: float = 0.1
    branching: tuple[int, ...] = ()
    seed: int = 0
    residual_tolerance: float | None = None
    selector: str = STMP

    def __post_init__(self):
        self.patch_shape = tuple(int(e) for e in self.patch_shape)
        self.stride = tuple(int(e) for e in self.stride)
        if len(self.patch_shape) != len(self.stride):
            raise ValueError(
                f"patch shape {self.patch_shape} and stride {self.stride} have different ranks"
            )
        if self.K < 1:
            raise ValueError(f"sparsity K must be at least 1, got {self.K}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.selector not in (EXACT, STMP):
            raise ValueError(f"selector must be '{EXACT}' or '{STMP}', got {self.selector!r}")
        self.branching = tuple(int(k) for k in self.branching)

    def search_params(self) -> SearchParams:
        return SearchParams(
            K=self.K,
            alpha=self.alpha,
            branching=self.branching,
            residual_tolerance=self.residual_tolerance,
        )


@dataclass
class TaskReport:
    """One restoration run: fidelity, cost, and the configuration echo."""

    task: str
    m: int
    n: int
    K: int
    alpha: float
    selector: str
    psnr_db: float | None
    snr_db: float | None
    inner_products: int
    patches: int
    seconds: float

    def csv_row(self) -> str:
        return ", ".join(
            [
                self.task,
                str(self.m),
                str(self.n),
                str(self.K),
                f"{self.alpha:g}",
                self.selector,
                _metric(self.psnr_db),
                _metric(self.snr_db),
                str(self.inner_products),
                str(self.patches),
                f"{self.seconds:.3f}",
            ]
        )


def _metric(value: float | None) -> str:
    if value is None:
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.6f}"


def add_noise_to_snr(t, target_snr_db, seed) -> np.ndarray:
    """Add seeded white Gaussian noise scaled to hit the target SNR.

    Passing None or an infinite target returns the tensor unchanged.
    """
    t = np.asarray(t, dtype=np.float32)
    if target_snr_db is None or math.isinf(target_snr_db):
        return t.copy()
    energy = float((t.astype(np.float64) ** 2).sum())
    if energy == 0.0:
        raise ValueError("cannot scale noise against an all-zero signal")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    noise = rng.standard_normal(t.shape)
    scale = math.sqrt(energy) / (float(np.linalg.norm(noise)) * 10.0 ** (target_snr_db / 20.0))
    return (t.astype(np.float64) + scale * noise).astype(np.float32)


def psnr(reference, test, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; infinite for identical inputs."""
    reference = np.asarray(reference, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if reference.shape != test.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {test.shape}")
    mse = float(((reference - test) ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def snr(reference, test) -> float:
    """Signal-to-noise ratio in dB of test against reference."""
    reference = np.asarray(reference, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if reference.shape != test.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {test.shape}")
    noise_energy = float(((reference - test) ** 2).sum())
    if noise_energy == 0.0:
        return math.inf
    signal_energy = float((reference ** 2).sum())
    if signal_energy == 0.0:
        return -math.inf
    return 10.0 * math.log10(signal_energy / noise_energy)


def _selector_for(dictionary: Dictionary, tree: ClusterTree | None, cfg: TaskConfig):
    if cfg.selector == EXACT:
        return ExactSelector(dictionary)
    if tree is None:
        raise ValueError("the stmp selector needs a cluster tree")
    return TreeSelector(tree, dictionary, cfg.alpha)


def _code_patches(
    measured: np.ndarray,
    dc_meas: np.ndarray,
    selector,
    pd,
    params: SearchParams,
    threads: int,
) -> tuple[np.ndarray, ScoreCounter]:
    """Code measurement patches and synthesize full-space patches.

    Returns the (N, n_full) synthesis matrix and the merged counter.  Chunk
    size is fixed, so the arithmetic (and hence the output) is independent
    of the thread count.
    """
    base = pd.base
    count = measured.shape[0]
    denom = float(dc_meas @ dc_meas)
    out = np.empty((count, base.n), dtype=np.float64)

    def work(start: int, stop: int) -> ScoreCounter:
        counter = ScoreCounter()
        for row in range(start, stop):
            y = measured[row]
            dc = float(y @ dc_meas) / denom
            code = matching_pursuit(selector, y - dc * dc_meas, params, counter)
            out[row] = reconstruct(base, lift_code(pd, code)) + dc
        return counter

    bounds = [(s, min(s + _CHUNK, count)) for s in range(0, count, _CHUNK)]
    total = ScoreCounter()
    if threads <= 1:
        for start, stop in bounds:
            total.merge(work(start, stop))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for counter in pool.map(lambda b: work(*b), bounds):
                total.merge(counter)
    return out, total


def _report(task, d, cfg, counter, patches, seconds, restored, reference) -> TaskReport:
    return TaskReport(
        task=task,
        m=d.m,
        n=d.n,
        K=cfg.K,
        alpha=cfg.alpha,
        selector=cfg.selector,
        psnr_db=None if reference is None else psnr(reference, restored),
        snr_db=None if reference is None else snr(reference, restored),
        inner_products=counter.inner_products,
        patches=patches,
        seconds=seconds,
    )


def _rowspace_recover(task, observed, op, d, tree, cfg, reference, threads):
    start = time.perf_counter()
    layout, patches = extract_patches(observed, cfg.patch_shape, cfg.stride)
    if layout.patch_dim != d.n:
        raise ValueError(
            f"patch dimension {layout.patch_dim} does not match dictionary dimension {d.n}"
        )
    pd = project_dictionary(d, op)
    selector = _selector_for(pd.dictionary, tree, cfg)
    measured = apply_batch(op, patches)
    dc_meas = apply(op, np.ones(d.n))
    full, counter = _code_patches(measured, dc_meas, selector, pd, cfg.search_params(), threads)
    restored = aggregate_patches(layout, full.astype(np.float32))
    seconds = time.perf_counter() - start
    report = _report(task, d, cfg, counter, layout.num_patches, seconds, restored, reference)
    return restored, report


def denoise(noisy, d: Dictionary, tree: ClusterTree | None, cfg: TaskConfig,
            reference=None, threads: int = 1):
    """Code every patch of a noisy tensor and average the reconstructions.

    Sparse approximation against the dictionary is the only prior: whatever
    the K chosen atoms cannot express is treated as noise and dropped.
    """
    op = identity_operator(d.n)
    return _rowspace_recover("denoise", noisy, op, d, tree, cfg, reference, threads)


def masked_recover(observed, op: ObservationOperator, d: Dictionary,
                   tree: ClusterTree | None, cfg: TaskConfig,
                   reference=None, threads: int = 1):
    """Complete unobserved patch coordinates from a row selection.

    The observed tensor keeps its full shape; only the coordinates the
    operator retains are trusted, and the synthesis fills in the rest.  The
    tree, when used, must be built on the projected dictionary.
    """
    if op.kind not in (ROW_SELECT, IDENTITY):
        raise ValueError(f"masked recovery expects a row-selection operator, got {op.kind}")
    return _rowspace_recover("maskrecover", observed, op, d, tree, cfg, reference, threads)


def super_resolve(lowres, d: Dictionary, tree: ClusterTree | None, cfg: TaskConfig,
                  factor: int = 4, reference=None, threads: int = 1):
    """Upscale by coding low-resolution patches against block-averaged atoms.

    cfg.patch_shape is the high-resolution (dictionary) patch; cfg.stride
    walks the low-resolution grid.  Codes found in measurement space are
    lifted onto the full atoms and aggregated on the scaled-up grid, whose
    origins land exactly ``factor`` times the low-resolution ones.
    """
    start = time.perf_counter()
    lowres = np.asarray(lowres, dtype=np.float32)
    hr_patch = cfg.patch_shape
    factors = (int(factor),) * lowres.ndim
    if len(hr_patch) != lowres.ndim:
        raise ValueError(f"patch shape {hr_patch} does not match input rank {lowres.ndim}")
    if math.prod(hr_patch) != d.n:
        raise ValueError(f"patch dimension {math.prod(hr_patch)} does not match dictionary {d.n}")
    for extent, f in zip(hr_patch, factors):
        if extent % f != 0:
            raise ValueError(f"factor {f} must divide patch extent {extent}")
    lr_patch = tuple(e // f for e, f in zip(hr_patch, factors))
    op = block_average_operator(hr_patch, factors)
    pd = project_dictionary(d, op)
    selector = _selector_for(pd.dictionary, tree, cfg)
    lr_layout, lr_patches = extract_patches(lowres, lr_patch, cfg.stride)
    dc_meas = apply(op, np.ones(d.n))
    full, counter = _code_patches(
        lr_patches.astype(np.float64), dc_meas, selector, pd, cfg.search_params(), threads
    )
    hr_shape = tuple(e * f for e, f in zip(lowres.shape, factors))
    hr_stride = tuple(s * f for s, f in zip(cfg.stride, factors))
    hr_layout = PatchLayout(hr_shape, hr_patch, hr_stride)
    restored = aggregate_patches(hr_layout, full.astype(np.float32))
    seconds = time.perf_counter() - start
    report = _report("superres", d, cfg, counter, lr_layout.num_patches, seconds,
                     restored, reference)
    return restored, report


def compressive_recover(measurements, op: ObservationOperator, d: Dictionary,
                        tree: ClusterTree | None, cfg: TaskConfig,
                        reference=None, threads: int = 1):
    """Recover a video from coded-exposure measurement frames.

    Measurement patches tile the measurement volume exactly (stride equals
    the patch), so every patch shares the operator's mask; the lifted codes
    synthesize full spatio-temporal patches on the corresponding video grid.
    """
    start = time.perf_counter()
    if op.kind != CODED_EXPOSURE:
        raise ValueError(f"compressive recovery expects a coded-exposure operator, got {op.kind}")
    measurements = np.asarray(measurements, dtype=np.float32)
    if tuple(cfg.patch_shape) != op.in_shape:
        raise ValueError(f"patch shape {cfg.patch_shape} does not match operator input {op.in_shape}")
    if math.prod(op.in_shape) != d.n:
        raise ValueError(f"operator input dimension {op.n_in} does not match dictionary {d.n}")
    spatial = op.mask.shape[:-1]
    frames = op.mask.shape[-1]
    meas_patch = spatial + (op.windows,)
    if measurements.ndim != len(meas_patch):
        raise ValueError(f"measurement rank {measurements.ndim} does not fit patch {meas_patch}")
    for axis, (extent, p) in enumerate(zip(measurements.shape, meas_patch)):
        if extent % p != 0:
            raise ValueError(
                f"measurement extent {extent} on axis {axis} is not a multiple of "
                f"the patch extent {p}; patches must tile the mask period"
            )
    pd = project_dictionary(d, op)
    selector = _selector_for(pd.dictionary, tree, cfg)
    m_layout, m_patches = extract_patches(measurements, meas_patch, meas_patch)
    dc_meas = apply(op, np.ones(d.n))
    full, counter = _code_patches(
        m_patches.astype(np.float64), dc_meas, selector, pd, cfg.search_params(), threads
    )
    video_shape = measurements.shape[:-1] + (measurements.shape[-1] * frames,)
    v_layout = PatchLayout(video_shape, op.in_shape, op.in_shape)
    restored = aggregate_patches(v_layout, full.astype(np.float32))
    seconds = time.perf_counter() - start
    report = _report("csrecover", d, cfg, counter, m_layout.num_patches, seconds,
                     restored, reference)
    return restored, report
